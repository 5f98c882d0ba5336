// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "w2l/alphabet.hpp"
#include "w2l/common.hpp"
#include "w2l/utf8.hpp"
#include "w2l/wav.hpp"

namespace w2l::synth {

/// A phone is two simultaneous tones.
struct Phone {
  double f1 = 0.0;
  double f2 = 0.0;
};

/// 36 phones on a 6 x 6 grid of low and high tones.
inline std::vector<Phone> phone_inventory() {
  const double lows[] = {300, 450, 620, 800, 1000, 1220};
  const double highs[] = {1600, 2000, 2450, 2950, 3500, 4100};
  std::vector<Phone> out;
  for (double lo : lows) {
    for (double hi : highs) out.push_back({lo, hi});
  }
  return out;
}

/// Grapheme-to-phone table plus the words sentences are drawn from.
struct Language {
  std::string name;
  Alphabet alphabet;
  std::map<std::string, int> phone_of;  // every label except space
  std::vector<std::string> vocabulary;
};

namespace detail {

inline std::vector<std::string> split_list(const char* words) { return utf8::split_words(words); }

}  // namespace detail

/// English-like source language: a..z and apostrophe on phones 0..26.
inline Language source_language() {
  Language l;
  l.name = "source";
  l.alphabet = Alphabet::english();
  int p = 0;
  for (const auto& g : l.alphabet.labels()) {
    if (g != " ") l.phone_of[g] = p++;
  }
  l.vocabulary = detail::split_list(
      "the of and to in is it you that he was for on are with as his they be at one have this from or had by "
      "word but what some we can out other were all there when up use your how said an each she which do "
      "their time if will way about many then them write would like so these her long make thing see him two "
      "has look more day could go come did number sound no most people my over know water than call first "
      "who may down side been now find don't it's quick jazz fox");
  return l;
}

/// German-like target language. Shares the source's phones, swaps three
/// grapheme pairs (v/w, j/y, c/z) and puts the four extra letters on phones
/// the source never uses.
inline Language target_language() {
  const Language src = source_language();
  Language l;
  l.name = "target";
  l.alphabet = Alphabet::german();
  l.phone_of = src.phone_of;
  const std::pair<const char*, const char*> swaps[] = {{"v", "w"}, {"j", "y"}, {"c", "z"}};
  for (const auto& [a, b] : swaps) std::swap(l.phone_of[a], l.phone_of[b]);
  int p = static_cast<int>(src.phone_of.size());
  for (const auto& g : Alphabet::german_extra()) l.phone_of[g] = p++;
  l.vocabulary = detail::split_list(
      "der die das und ist nicht ein zu ich sie mit für auf dem über schön grüße fuß straße mädchen öl übung "
      "hören müssen größe weiß jahr zwei wir wo was viel von vater wasser zeit kind haus jetzt ja wie weg "
      "zug bär käse tür böse süß heiß");
  return l;
}

struct RenderConfig {
  int sample_rate = 16000;
  double grapheme_ms = 72.0;
  double duration_jitter_ms = 12.0;
  double gap_ms = 16.0;
  double space_ms = 64.0;
  double edge_ms = 160.0;
  double frequency_jitter = 0.015;  // relative
  double amplitude = 0.3;
  double noise = 0.02;
  double ramp_ms = 5.0;
};

/// Renders text as per-grapheme tone pairs with silence for spaces, small
/// gaps between graphemes, random timing and pitch jitter, and white noise.
inline Waveform render(const std::string& text, const Language& lang, const RenderConfig& cfg, std::mt19937_64& rng) {
  const auto phones = phone_inventory();
  const double sr = cfg.sample_rate;
  auto samples_of = [&](double ms) { return static_cast<std::size_t>(std::max(0.0, std::round(ms * sr / 1000.0))); };
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, cfg.noise);

  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.assign(samples_of(cfg.edge_ms), 0.0);
  for (const auto& g : utf8::split_code_points(text)) {
    if (g == " ") {
      w.samples.resize(w.samples.size() + samples_of(cfg.space_ms), 0.0);
      continue;
    }
    auto it = lang.phone_of.find(g);
    if (it == lang.phone_of.end()) throw Error("grapheme '" + g + "' has no phone in language " + lang.name);
    const Phone& ph = phones.at(static_cast<std::size_t>(it->second));
    const double f1 = ph.f1 * (1.0 + cfg.frequency_jitter * unit(rng));
    const double f2 = ph.f2 * (1.0 + cfg.frequency_jitter * unit(rng));
    const double p1 = phase(rng), p2 = phase(rng);
    const std::size_t n = samples_of(cfg.grapheme_ms + cfg.duration_jitter_ms * unit(rng));
    const std::size_t ramp = std::min(n / 2, samples_of(cfg.ramp_ms));
    for (std::size_t i = 0; i < n; ++i) {
      double env = 1.0;
      if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp));
      if (n - 1 - i < ramp) {
        env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / static_cast<double>(ramp));
      }
      const double t = static_cast<double>(i) / sr;
      w.samples.push_back(cfg.amplitude * env *
                          (std::sin(2.0 * std::numbers::pi * f1 * t + p1) + std::sin(2.0 * std::numbers::pi * f2 * t + p2)));
    }
    w.samples.resize(w.samples.size() + samples_of(cfg.gap_ms), 0.0);
  }
  w.samples.resize(w.samples.size() + samples_of(cfg.edge_ms), 0.0);
  for (auto& s : w.samples) s += noise(rng);
  return w;
}

/// Between min_words and max_words vocabulary words joined by spaces.
inline std::string random_sentence(const Language& lang, std::mt19937_64& rng, int min_words = 1, int max_words = 3) {
  if (lang.vocabulary.empty()) throw Error("language has no vocabulary");
  std::uniform_int_distribution<int> count(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, lang.vocabulary.size() - 1);
  std::string s;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += lang.vocabulary[pick(rng)];
  }
  return s;
}

inline Language language_by_name(const std::string& name) {
  if (name == "source" || name == "en") return source_language();
  if (name == "target" || name == "de") return target_language();
  throw Error("unknown synthetic language '" + name + "' (expected source or target)");
}

}  // namespace w2l::synth
