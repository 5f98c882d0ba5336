// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "w2l/adam.hpp"
#include "w2l/common.hpp"
#include "w2l/frontend.hpp"
#include "w2l/net.hpp"

namespace w2l {

// Config file format, one setting per line:
//
//   # comment
//   [model]
//   hidden = 250
//
// Keys are addressed as section.key. Unknown sections or keys are errors.

struct DecoderSettings {
  int beam_width = 64;
  double w_lm = 0.8;
  double w_valid_word = 2.3;
  std::string lm;  // ARPA path; empty for no LM
};

struct TrainingSettings {
  int batch_size = 64;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t steps = 0;  // 0: use epochs
  int epochs = 1;
  std::uint64_t seed = 1;
  int freeze_k = 0;
  int checkpoint_every = 0;

  AdamHyper adam() const { return {learning_rate, beta1, beta2, epsilon}; }
};

struct RunConfig {
  Wav2LetterShape model;
  FrontendConfig frontend;
  DecoderSettings decoder;
  TrainingSettings training;

  ModelConfig model_config(int num_labels) const { return wav2letter_config(model, num_labels, frontend.n_mels); }

  void validate() const {
    frontend.validate();
    if (model.first_kernel < 1 || model.first_stride < 1 || model.mid_kernel < 1 || model.mid_layers < 0 ||
        model.wide_kernel < 1 || model.hidden < 1 || model.wide < 1) {
      throw Error("model shape values must be positive");
    }
    if (decoder.beam_width < 1) throw Error("decoder.beam_width must be >= 1");
    if (training.batch_size < 1) throw Error("training.batch_size must be >= 1");
    if (!(training.learning_rate > 0.0)) throw Error("training.learning_rate must be positive");
    if (training.steps < 0 || training.epochs < 0) throw Error("training budget must be non-negative");
    if (training.steps == 0 && training.epochs == 0) throw Error("training needs steps or epochs");
    if (training.checkpoint_every < 0) throw Error("training.checkpoint_every must be non-negative");
  }
};

/// One addressable setting: "section.key", a description, and accessors.
struct ConfigField {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

namespace detail {

template <typename T>
T parse_number(const std::string& name, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw Error("invalid value '" + text + "' for " + name);
  return v;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename Section, typename T>
ConfigField field(std::string name, std::string help, Section RunConfig::*section, T Section::*member) {
  ConfigField f;
  f.name = name;
  f.help = std::move(help);
  f.get = [section, member](const RunConfig& c) {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*section.*member;
    } else if constexpr (std::is_floating_point_v<T>) {
      return format_double(c.*section.*member);
    } else {
      return std::to_string(c.*section.*member);
    }
  };
  f.set = [name, section, member](RunConfig& c, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*section.*member = v;
    } else {
      c.*section.*member = parse_number<T>(name, v);
    }
  };
  return f;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline const std::vector<ConfigField>& config_fields() {
  using detail::field;
  static const std::vector<ConfigField> fields = {
      field("model.first_kernel", "kernel width of the strided input layer", &RunConfig::model, &Wav2LetterShape::first_kernel),
      field("model.first_stride", "stride of the input layer", &RunConfig::model, &Wav2LetterShape::first_stride),
      field("model.mid_kernel", "kernel width of the middle layers", &RunConfig::model, &Wav2LetterShape::mid_kernel),
      field("model.mid_layers", "number of middle layers", &RunConfig::model, &Wav2LetterShape::mid_layers),
      field("model.wide_kernel", "kernel width of the wide layer", &RunConfig::model, &Wav2LetterShape::wide_kernel),
      field("model.hidden", "channels of the input and middle layers", &RunConfig::model, &Wav2LetterShape::hidden),
      field("model.wide", "channels of the wide and 1x1 layers", &RunConfig::model, &Wav2LetterShape::wide),
      field("frontend.window_ms", "STFT window length", &RunConfig::frontend, &FrontendConfig::window_ms),
      field("frontend.stride_ms", "STFT hop length", &RunConfig::frontend, &FrontendConfig::stride_ms),
      field("frontend.fft_size", "FFT size", &RunConfig::frontend, &FrontendConfig::fft_size),
      field("frontend.n_mels", "mel bands (network input channels)", &RunConfig::frontend, &FrontendConfig::n_mels),
      field("frontend.sample_rate", "target sample rate in Hz", &RunConfig::frontend, &FrontendConfig::sample_rate),
      field("frontend.max_duration_s", "drop utterances longer than this", &RunConfig::frontend, &FrontendConfig::max_duration_s),
      field("decoder.beam_width", "beam width", &RunConfig::decoder, &DecoderSettings::beam_width),
      field("decoder.w_lm", "LM weight", &RunConfig::decoder, &DecoderSettings::w_lm),
      field("decoder.w_valid_word", "bonus per in-vocabulary word", &RunConfig::decoder, &DecoderSettings::w_valid_word),
      field("decoder.lm", "ARPA language model path", &RunConfig::decoder, &DecoderSettings::lm),
      field("training.batch_size", "utterances per batch", &RunConfig::training, &TrainingSettings::batch_size),
      field("training.learning_rate", "Adam learning rate", &RunConfig::training, &TrainingSettings::learning_rate),
      field("training.beta1", "Adam beta1", &RunConfig::training, &TrainingSettings::beta1),
      field("training.beta2", "Adam beta2", &RunConfig::training, &TrainingSettings::beta2),
      field("training.epsilon", "Adam epsilon", &RunConfig::training, &TrainingSettings::epsilon),
      field("training.steps", "step budget (0: use epochs)", &RunConfig::training, &TrainingSettings::steps),
      field("training.epochs", "epoch budget when steps is 0", &RunConfig::training, &TrainingSettings::epochs),
      field("training.seed", "seed for init and batching", &RunConfig::training, &TrainingSettings::seed),
      field("training.freeze_k", "number of frozen bottom layers", &RunConfig::training, &TrainingSettings::freeze_k),
      field("training.checkpoint_every", "steps between checkpoints (0: final only)", &RunConfig::training,
            &TrainingSettings::checkpoint_every),
  };
  return fields;
}

inline const ConfigField& config_field(const std::string& name) {
  for (const auto& f : config_fields()) {
    if (f.name == name) return f;
  }
  throw Error("unknown config key '" + name + "'");
}

inline void set_config_value(RunConfig& c, const std::string& name, const std::string& value) {
  config_field(name).set(c, value);
}

/// Applies every setting in the stream on top of `base`.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}, const std::string& source = "<config>") {
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(where + "malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(where + "expected key = value");
    if (section.empty()) throw Error(where + "setting outside of a section");
    try {
      set_config_value(base, section + "." + detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  return parse_config(in, std::move(base), path.string());
}

inline void write_config(std::ostream& out, const RunConfig& c) {
  std::string section;
  for (const auto& f : config_fields()) {
    const auto dot = f.name.find('.');
    const auto s = f.name.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << '[' << s << "]\n";
      section = s;
    }
    out << f.name.substr(dot + 1) << " = " << f.get(c) << '\n';
  }
}

}  // namespace w2l
