// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "w2l/alphabet.hpp"
#include "w2l/common.hpp"
#include "w2l/frontend.hpp"
#include "w2l/wav.hpp"

namespace w2l {

/// One line of a JSON Lines manifest: {"audio": "<path>", "text": "<transcript>"}.
/// An optional "duration" (seconds) avoids reading the audio during filtering.
struct ManifestEntry {
  std::string audio;
  std::string text;
  std::optional<double> duration;
};

using Manifest = std::vector<ManifestEntry>;

/// Reads a JSONL manifest. Relative audio paths resolve against the
/// manifest's directory and come back absolute.
inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  Manifest out;
  std::string line;
  int lineno = 0;
  const auto base = std::filesystem::absolute(path).parent_path();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("audio") || !j["audio"].is_string()) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": missing string field \"audio\"");
    }
    ManifestEntry e;
    std::filesystem::path audio = j["audio"].get<std::string>();
    if (audio.is_relative()) audio = (base / audio).lexically_normal();
    e.audio = audio.string();
    if (j.contains("text") && j["text"].is_string()) e.text = j["text"].get<std::string>();
    if (j.contains("duration") && j["duration"].is_number()) e.duration = j["duration"].get<double>();
    out.push_back(std::move(e));
  }
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest '" + path.string() + "'");
  for (const auto& e : m) {
    nlohmann::json j{{"audio", e.audio}, {"text", e.text}};
    if (e.duration) j["duration"] = *e.duration;
    out << j.dump() << '\n';
  }
}

enum class RemovalReason { TooLong, EmptyTranscript, UnreadableAudio, UnsupportedCharacters };

inline const char* to_string(RemovalReason r) {
  switch (r) {
    case RemovalReason::TooLong: return "too long";
    case RemovalReason::EmptyTranscript: return "empty transcript";
    case RemovalReason::UnreadableAudio: return "unreadable audio";
    case RemovalReason::UnsupportedCharacters: return "unsupported characters";
  }
  return "unknown";
}

struct FilterReport {
  Manifest kept;
  std::vector<std::pair<ManifestEntry, RemovalReason>> removed;
  std::map<RemovalReason, int> counts;
  std::vector<std::string> messages;

  int count(RemovalReason r) const {
    auto it = counts.find(r);
    return it == counts.end() ? 0 : it->second;
  }
};

/// Drops utterances that are too long, have empty transcripts, have audio
/// that cannot be read, or (when an alphabet is given) use characters outside
/// it. Problems are reported, never thrown.
inline FilterReport filter_dataset(const Manifest& manifest, const FrontendConfig& cfg,
                                   const Alphabet* alphabet = nullptr) {
  FilterReport report;
  auto drop = [&](const ManifestEntry& e, RemovalReason r) {
    report.removed.emplace_back(e, r);
    ++report.counts[r];
  };
  for (const auto& e : manifest) {
    if (e.text.find_first_not_of(" \t") == std::string::npos) {
      drop(e, RemovalReason::EmptyTranscript);
      continue;
    }
    if (alphabet != nullptr && !alphabet->covers(e.text)) {
      drop(e, RemovalReason::UnsupportedCharacters);
      continue;
    }
    double duration = 0.0;
    if (e.duration) {
      duration = *e.duration;
    } else {
      try {
        duration = load_audio(e.audio).duration_seconds();
      } catch (const Error& err) {
        report.messages.emplace_back(err.what());
        drop(e, RemovalReason::UnreadableAudio);
        continue;
      }
    }
    if (duration > cfg.max_duration_s) {
      drop(e, RemovalReason::TooLong);
      continue;
    }
    ManifestEntry kept = e;
    kept.duration = duration;
    report.kept.push_back(std::move(kept));
  }
  return report;
}

}  // namespace w2l
