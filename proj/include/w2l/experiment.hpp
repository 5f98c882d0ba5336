// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "w2l/config.hpp"
#include "w2l/synth.hpp"
#include "w2l/train.hpp"

namespace w2l {

struct SynthSet {
  int count = 100;
  int min_words = 1;
  int max_words = 2;
  std::uint64_t seed = 1;
  synth::RenderConfig render;
};

/// Renders `count` random sentences and extracts their features in memory.
inline std::vector<Utterance> synth_utterances(const synth::Language& lang, const SynthSet& set,
                                               const FrontendConfig& frontend) {
  std::mt19937_64 rng(set.seed);
  synth::RenderConfig render = set.render;
  render.sample_rate = frontend.sample_rate;
  std::vector<Utterance> out;
  out.reserve(static_cast<std::size_t>(set.count));
  for (int i = 0; i < set.count; ++i) {
    const auto text = synth::random_sentence(lang, rng, set.min_words, set.max_words);
    const auto wave = synth::render(text, lang, render, rng);
    out.push_back(make_utterance(lang.name + "_" + std::to_string(i), wave, text, frontend, lang.alphabet));
  }
  return out;
}

/// Small model, frontend and optimizer settings that train in minutes on one
/// CPU core. Used by the synthetic experiments and as a starting point for
/// desk-scale configs.
inline RunConfig desk_config() {
  RunConfig c;
  c.model.first_kernel = 8;
  c.model.first_stride = 2;
  c.model.mid_kernel = 3;
  c.model.mid_layers = 7;
  c.model.wide_kernel = 8;
  c.model.hidden = 64;
  c.model.wide = 128;
  c.frontend.n_mels = 40;
  c.training.batch_size = 8;
  c.decoder.beam_width = 16;
  return c;
}

/// Two-language synthetic transfer task: noisy, jittered renderings of
/// sentences of up to four words, one training set per language.
struct TransferTask {
  RunConfig config = desk_config();
  SynthSet source;
  SynthSet target;
  std::int64_t pretrain_steps = 2000;
  std::int64_t transfer_steps = 1000;
  std::size_t smoothing_window = 50;
  int checkpoint_every = 50;
};

inline TransferTask transfer_task(std::uint64_t seed) {
  TransferTask t;
  SynthSet s;
  s.count = 1000;
  s.min_words = 1;
  s.max_words = 4;
  s.render.noise = 0.6;
  s.render.frequency_jitter = 0.05;
  s.render.duration_jitter_ms = 25.0;
  t.source = s;
  t.source.seed = seed * 100 + 1;
  t.target = s;
  t.target.seed = seed * 100 + 2;
  t.config.training.seed = seed;
  return t;
}

}  // namespace w2l
