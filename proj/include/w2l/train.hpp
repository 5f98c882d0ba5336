// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "w2l/adam.hpp"
#include "w2l/checkpoint.hpp"
#include "w2l/ctc.hpp"
#include "w2l/dataset.hpp"
#include "w2l/frontend.hpp"
#include "w2l/net.hpp"
#include "w2l/transfer.hpp"
#include "w2l/wav.hpp"

namespace w2l {

/// One utterance ready for training: normalized features and encoded labels.
struct Utterance {
  std::string id;
  std::string text;
  LabelSeq labels;
  Mat<double> features;  // [frames x n_mels]
};

inline Utterance make_utterance(std::string id, const Waveform& w, const std::string& text,
                                const FrontendConfig& frontend, const Alphabet& alphabet) {
  Utterance u;
  u.id = std::move(id);
  u.text = text;
  u.labels = alphabet.encode(text);
  u.features = extract_features(w, frontend).frames;
  return u;
}

/// Reads every manifest entry's audio and extracts features. Entries are
/// expected to have passed filter_dataset.
inline std::vector<Utterance> load_utterances(const Manifest& manifest, const FrontendConfig& frontend,
                                              const Alphabet& alphabet) {
  std::vector<Utterance> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest) out.push_back(make_utterance(e.audio, load_audio(e.audio), e.text, frontend, alphabet));
  return out;
}

/// Duration-bucketed batches: utterances are sorted by length, cut into
/// buckets of 4 batches, shuffled within each bucket, chunked into batches,
/// and the batch order is shuffled. Every index appears exactly once.
inline std::vector<std::vector<int>> make_batches(const std::vector<int>& lengths, int batch_size, std::mt19937_64& rng) {
  if (batch_size < 1) throw Error("batch size must be >= 1");
  std::vector<int> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return lengths[static_cast<std::size_t>(a)] < lengths[static_cast<std::size_t>(b)];
  });
  const std::size_t bucket = static_cast<std::size_t>(batch_size) * 4;
  for (std::size_t start = 0; start < order.size(); start += bucket) {
    const auto end = std::min(order.size(), start + bucket);
    std::shuffle(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end), rng);
  }
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

template <typename S>
struct BatchLoss {
  double loss = 0.0;   // mean CTC loss over usable sequences
  int used = 0;
  int skipped = 0;     // too short for the network or infeasible for CTC
  Mat<S> grad;         // d mean loss / d log_probs, shaped like ForwardResult::log_probs
};

/// Mean CTC loss and gradient over a forward result. Sequences whose output
/// cannot carry their label are skipped and counted.
template <typename S>
BatchLoss<S> batch_ctc_loss(const ForwardResult<S>& fwd, const std::vector<const LabelSeq*>& labels, int blank) {
  BatchLoss<S> r;
  r.grad = Mat<S>::Zero(fwd.log_probs.rows(), fwd.log_probs.cols());
  std::vector<std::pair<int, Mat<double>>> grads;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    try {
      auto res = ctc_loss_grad(fwd.sequence(static_cast<int>(b)), *labels[b], blank);
      r.loss += res.loss;
      grads.emplace_back(static_cast<int>(b), std::move(res.grad));
      ++r.used;
    } catch (const InfeasibleAlignment&) {
      ++r.skipped;
    }
  }
  if (r.used == 0) return r;
  r.loss /= r.used;
  const double scale = 1.0 / r.used;
  for (const auto& [b, g] : grads) {
    r.grad.block(static_cast<Eigen::Index>(b) * fwd.frames_out, 0, g.rows(), g.cols()) = (g * scale).template cast<S>();
  }
  return r;
}

struct StepStats {
  double loss = 0.0;
  int used = 0;
  int skipped = 0;
  bool updated = false;
};

/// Holds parameters, optimizer state and freeze mask for a training run.
class Trainer {
public:
  Trainer(ModelParams<float> params, int freeze_k, AdamHyper hyper = {})
      : params_(std::move(params)), mask_(make_freeze_mask(params_.config, freeze_k)) {
    params_.validate();
    if (mask_.evaluation_only()) throw Error("no trainable layers: k equals the layer count");
    state_ = AdamState<float>::fresh(params_, mask_, hyper);
  }

  Trainer(ModelParams<float> params, int freeze_k, AdamState<float> state)
      : params_(std::move(params)), mask_(make_freeze_mask(params_.config, freeze_k)), state_(std::move(state)) {
    params_.validate();
    if (mask_.evaluation_only()) throw Error("no trainable layers: k equals the layer count");
    for (int l = 0; l < params_.num_layers(); ++l) {
      if (state_.layers.at(static_cast<std::size_t>(l)).has_value() != mask_.trainable(l)) {
        throw Error("optimizer state does not match freeze mask at layer " + std::to_string(l + 1));
      }
    }
  }

  /// Forward, CTC, backward and one Adam update on the given utterances.
  StepStats step(const std::vector<const Utterance*>& batch, BufferMeter* meter = nullptr) {
    StepStats s;
    const int min_frames = min_input_frames(params_.config);
    std::vector<const Mat<double>*> feats;
    std::vector<const LabelSeq*> labels;
    for (const auto* u : batch) {
      if (u->features.rows() < min_frames || u->labels.empty()) {
        ++s.skipped;
        continue;
      }
      feats.push_back(&u->features);
      labels.push_back(&u->labels);
    }
    if (feats.empty()) return s;
    const auto fwd = forward(params_, make_batch<float>(feats), true, mask_.k(), meter);
    auto bl = batch_ctc_loss(fwd, labels, params_.alphabet.blank());
    s.skipped += bl.skipped;
    s.used = bl.used;
    if (bl.used == 0) return s;
    s.loss = bl.loss;
    const auto grads = backward(params_, fwd, bl.grad, mask_, meter);
    adam_step(params_, grads, state_);
    s.updated = true;
    return s;
  }

  const ModelParams<float>& params() const { return params_; }
  const AdamState<float>& adam() const { return state_; }
  const FreezeMask& mask() const { return mask_; }
  std::uint64_t steps() const { return state_.step; }

  Checkpoint checkpoint() const { return Checkpoint{params_, state_, state_.step}; }

private:
  ModelParams<float> params_;
  FreezeMask mask_;
  AdamState<float> state_;
};

struct LogRow {
  std::int64_t step = 0;
  double wall_seconds = 0.0;
  double batch_loss = 0.0;
  int k = 0;
};

inline void write_log_header(std::ostream& out) { out << "step,wall_seconds,batch_loss,k\n"; }

inline void write_log_row(std::ostream& out, const LogRow& r) {
  out << r.step << ',' << std::fixed << std::setprecision(6) << r.wall_seconds << ',' << std::setprecision(8)
      << r.batch_loss << ',' << r.k << '\n';
  out.unsetf(std::ios::floatfield);
  out << std::flush;
}

struct TrainOptions {
  int batch_size = 64;
  std::int64_t max_steps = 0;  // 0: stop after `epochs`
  int epochs = 1;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;    // steps; 0 disables periodic checkpoints
  std::filesystem::path checkpoint_dir;
};

struct TrainSummary {
  std::vector<LogRow> log;
  std::int64_t steps = 0;
  int epochs = 0;
  std::int64_t skipped = 0;    // sample-level skips across all steps
};

/// Runs epochs of bucketed batches until max_steps or the epoch budget is
/// reached. Each completed step appends one log row (and streams it to
/// log_out when given).
inline TrainSummary train(Trainer& trainer, const std::vector<Utterance>& data, const TrainOptions& opt,
                          std::ostream* log_out = nullptr,
                          const std::function<void(const LogRow&)>& on_step = nullptr) {
  if (data.empty()) throw Error("training set is empty");
  if (opt.max_steps <= 0 && opt.epochs <= 0) throw Error("need a positive step or epoch budget");
  std::vector<int> lengths;
  lengths.reserve(data.size());
  for (const auto& u : data) lengths.push_back(static_cast<int>(u.features.rows()));
  std::mt19937_64 rng(opt.seed);
  TrainSummary summary;
  const auto start = std::chrono::steady_clock::now();
  if (log_out != nullptr) write_log_header(*log_out);
  auto done = [&] {
    if (opt.max_steps > 0) return summary.steps >= opt.max_steps;
    return summary.epochs >= opt.epochs;
  };
  std::int64_t stalled_epochs = 0;
  while (!done()) {
    const auto steps_before = summary.steps;
    for (const auto& idx : make_batches(lengths, opt.batch_size, rng)) {
      std::vector<const Utterance*> batch;
      for (int i : idx) batch.push_back(&data[static_cast<std::size_t>(i)]);
      const auto st = trainer.step(batch);
      summary.skipped += st.skipped;
      if (!st.updated) continue;
      ++summary.steps;
      LogRow row{summary.steps, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), st.loss,
                 trainer.mask().k()};
      summary.log.push_back(row);
      if (log_out != nullptr) write_log_row(*log_out, row);
      if (on_step) on_step(row);
      if (opt.checkpoint_every > 0 && !opt.checkpoint_dir.empty() && summary.steps % opt.checkpoint_every == 0) {
        save_checkpoint(opt.checkpoint_dir / ("step_" + std::to_string(summary.steps) + ".ckpt"), trainer.checkpoint());
      }
      if (opt.max_steps > 0 && summary.steps >= opt.max_steps) break;
    }
    ++summary.epochs;
    if (summary.steps == steps_before && ++stalled_epochs >= 1) {
      throw Error("no utterance in the training set is usable (all too short or infeasible)");
    }
  }
  return summary;
}

/// Mean of the batch losses in a trailing window ending at each row.
inline std::vector<double> smoothed_losses(const std::vector<LogRow>& log, std::size_t window) {
  std::vector<double> out;
  double acc = 0.0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    acc += log[i].batch_loss;
    if (i >= window) acc -= log[i - window].batch_loss;
    out.push_back(acc / static_cast<double>(std::min(window, i + 1)));
  }
  return out;
}

/// Parameters for a transfer run: alphabet extension, then optional
/// re-initialization of every layer above the freeze boundary.
struct TransferSetup {
  int freeze_k = 0;
  bool reinit = false;
  std::vector<std::string> new_labels;
  std::uint64_t seed = 1;
};

inline ModelParams<float> prepare_transfer(const ModelParams<float>& base, const TransferSetup& t) {
  const FreezeMask mask = make_freeze_mask(base.config, t.freeze_k);
  if (mask.evaluation_only()) throw Error("no trainable layers: k equals the layer count");
  ModelParams<float> p = t.new_labels.empty() ? base : extend_alphabet(base, t.new_labels);
  if (t.reinit) p = reinit_layers(p, trainable_layers(mask), t.seed);
  return p;
}

}  // namespace w2l
