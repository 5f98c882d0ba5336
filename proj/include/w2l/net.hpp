// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "w2l/alphabet.hpp"
#include "w2l/common.hpp"
#include "w2l/freeze.hpp"
#include "w2l/meter.hpp"

namespace w2l {

enum class Activation { Relu, None };

inline const char* to_string(Activation a) { return a == Activation::Relu ? "relu" : "none"; }

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "none") return Activation::None;
  throw Error("unknown activation '" + s + "'");
}

struct LayerSpec {
  int kernel_width = 1;
  int stride = 1;
  int in_channels = 1;
  int out_channels = 1;
  Activation activation = Activation::Relu;

  int fan_in() const { return in_channels * kernel_width; }
  int fan_out() const { return out_channels * kernel_width; }
  bool operator==(const LayerSpec&) const = default;
};

struct ModelConfig {
  int n_mels = 128;
  std::vector<LayerSpec> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }
  int num_classes() const { return layers.empty() ? 0 : layers.back().out_channels; }

  void validate() const {
    if (layers.empty()) throw Error("model config has no layers");
    if (n_mels <= 0) throw Error("n_mels must be positive");
    int prev = n_mels;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const auto where = "layer " + std::to_string(i + 1);
      if (l.kernel_width <= 0 || l.stride <= 0 || l.in_channels <= 0 || l.out_channels <= 0) {
        throw Error(where + ": all dimensions must be positive");
      }
      if (l.in_channels != prev) {
        throw Error(where + ": in_channels " + std::to_string(l.in_channels) + " != previous output " +
                    std::to_string(prev));
      }
      prev = l.out_channels;
    }
    if (layers.back().activation != Activation::None) throw Error("final layer must not have an activation");
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Kernel/stride/width schedule of the Wav2Letter stack: a strided input
/// layer, mid_layers equal layers, a wide layer, a 1x1 layer and the 1x1
/// output layer.
struct Wav2LetterShape {
  int first_kernel = 48;
  int first_stride = 2;
  int mid_kernel = 7;
  int mid_layers = 7;
  int wide_kernel = 32;
  int hidden = 250;
  int wide = 2000;

  bool operator==(const Wav2LetterShape&) const = default;
};

inline ModelConfig wav2letter_config(const Wav2LetterShape& s, int num_labels, int n_mels) {
  if (num_labels < 2) throw Error("alphabet needs at least two labels");
  ModelConfig c;
  c.n_mels = n_mels;
  c.layers.push_back({s.first_kernel, s.first_stride, n_mels, s.hidden, Activation::Relu});
  for (int i = 0; i < s.mid_layers; ++i) c.layers.push_back({s.mid_kernel, 1, s.hidden, s.hidden, Activation::Relu});
  c.layers.push_back({s.wide_kernel, 1, s.hidden, s.wide, Activation::Relu});
  c.layers.push_back({1, 1, s.wide, s.wide, Activation::Relu});
  c.layers.push_back({1, 1, s.wide, num_labels + 1, Activation::None});
  c.validate();
  return c;
}

/// Default kernel schedule with the hidden and wide widths set explicitly.
inline ModelConfig wav2letter_config(int num_labels, int n_mels, int hidden, int wide) {
  Wav2LetterShape s;
  s.hidden = hidden;
  s.wide = wide;
  return wav2letter_config(s, num_labels, n_mels);
}

/// 11 layers: conv48/2 x250, 7 x conv7 x250, conv32 x2000, conv1 x2000,
/// conv1 to labels + blank.
inline ModelConfig default_config(int num_labels, int n_mels = 128) {
  return wav2letter_config(num_labels, n_mels, 250, 2000);
}

/// Valid-convolution output length; throws naming the first layer whose
/// output would be empty.
inline int output_length(int frames, const ModelConfig& config) {
  int t = frames;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& l = config.layers[i];
    if (t < l.kernel_width) {
      throw Error("input of " + std::to_string(frames) + " frames too short: layer " + std::to_string(i + 1) +
                  " (kernel " + std::to_string(l.kernel_width) + ") receives " + std::to_string(t) + " frames");
    }
    t = (t - l.kernel_width) / l.stride + 1;
  }
  return t;
}

/// Smallest input length for which every layer produces at least one frame.
inline int min_input_frames(const ModelConfig& config) {
  int t = 1;
  for (auto it = config.layers.rbegin(); it != config.layers.rend(); ++it) {
    t = (t - 1) * it->stride + it->kernel_width;
  }
  return t;
}

/// Weight is [out x (in * kw)], element (o, c * kw + j) = W[o][c][j].
template <typename S>
struct Layer {
  Mat<S> weight;
  Vec<S> bias;

  bool operator==(const Layer& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() && bias.size() == o.bias.size() &&
           weight == o.weight && bias == o.bias;
  }
};

template <typename S>
struct ModelParams {
  ModelConfig config;
  Alphabet alphabet;
  std::vector<Layer<S>> layers;

  int num_layers() const { return static_cast<int>(layers.size()); }

  template <typename T>
  ModelParams<T> cast() const {
    ModelParams<T> out{config, alphabet, {}};
    for (const auto& l : layers) out.layers.push_back({l.weight.template cast<T>(), l.bias.template cast<T>()});
    return out;
  }

  void validate() const {
    config.validate();
    if (config.num_classes() != alphabet.num_classes()) {
      throw Error("output layer has " + std::to_string(config.num_classes()) + " classes, alphabet needs " +
                  std::to_string(alphabet.num_classes()));
    }
    if (layers.size() != config.layers.size()) throw Error("parameter/config layer count mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& spec = config.layers[i];
      const auto& l = layers[i];
      if (l.weight.rows() != spec.out_channels || l.weight.cols() != spec.fan_in() ||
          l.bias.size() != spec.out_channels) {
        throw Error("layer " + std::to_string(i + 1) + ": parameter shape does not match config");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw Error("layer " + std::to_string(i + 1) + ": non-finite parameters");
      }
    }
  }
};

inline double xavier_limit(const LayerSpec& spec) {
  return std::sqrt(6.0 / static_cast<double>(spec.fan_in() + spec.fan_out()));
}

namespace detail {

// Per-layer generator so that any subset of layers can be redrawn and still
// match a full initialization with the same seed.
inline std::mt19937_64 layer_rng(std::uint64_t seed, int layer) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(layer), 0x5eedu};
  return std::mt19937_64(seq);
}

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Xavier-uniform weights in the open interval (-L, L), L = sqrt(6/(fan_in+fan_out)),
/// zero biases.
template <typename S>
Layer<S> xavier_layer(const LayerSpec& spec, std::uint64_t seed, int layer_index) {
  auto rng = detail::layer_rng(seed, layer_index);
  const double limit = xavier_limit(spec);
  const auto lim_s = static_cast<S>(limit);
  Layer<S> l{Mat<S>(spec.out_channels, spec.fan_in()), Vec<S>::Zero(spec.out_channels)};
  for (Eigen::Index i = 0; i < l.weight.size(); ++i) {
    S v;
    do {
      v = static_cast<S>(limit * (2.0 * detail::unit_uniform(rng) - 1.0));
    } while (!(std::abs(v) < lim_s));
    l.weight.data()[i] = v;
  }
  return l;
}

template <typename S>
ModelParams<S> init_xavier(const ModelConfig& config, const Alphabet& alphabet, std::uint64_t seed) {
  config.validate();
  ModelParams<S> p{config, alphabet, {}};
  for (int i = 0; i < config.num_layers(); ++i) {
    p.layers.push_back(xavier_layer<S>(config.layers[static_cast<std::size_t>(i)], seed, i));
  }
  p.validate();
  return p;
}

/// Zero-padded batch of feature sequences, rows [b*frames, (b+1)*frames)
/// belong to sequence b. Rows past lengths[b] are padding.
template <typename S>
struct PaddedBatch {
  Mat<S> data;
  int frames = 0;
  std::vector<int> lengths;

  int size() const { return static_cast<int>(lengths.size()); }
  int channels() const { return static_cast<int>(data.cols()); }
};

template <typename S>
PaddedBatch<S> make_batch(const std::vector<const Mat<double>*>& sequences) {
  PaddedBatch<S> b;
  for (const auto* s : sequences) b.frames = std::max(b.frames, static_cast<int>(s->rows()));
  const auto channels = sequences.empty() ? 0 : sequences.front()->cols();
  b.data = Mat<S>::Zero(static_cast<Eigen::Index>(sequences.size()) * b.frames, channels);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& s = *sequences[i];
    if (s.cols() != channels) throw Error("batch sequences have different channel counts");
    b.data.block(static_cast<Eigen::Index>(i) * b.frames, 0, s.rows(), channels) = s.template cast<S>();
    b.lengths.push_back(static_cast<int>(s.rows()));
  }
  return b;
}

/// Activations retained for backpropagation. For freeze boundary k only the
/// inputs of layers k..L-1 are kept (layer k's input is the output of the
/// topmost frozen layer); frozen layers below are run and discarded.
template <typename S>
struct ForwardCache {
  int freeze_k = 0;
  std::vector<Mat<S>> packed_weights;        // [out x (kw * in)], per layer
  std::vector<std::vector<Tracked<S>>> inputs;  // [sequence][layer - k]
  std::vector<Tracked<S>> log_probs;          // [sequence] valid frames only

  bool empty() const { return inputs.empty(); }
};

template <typename S>
struct ForwardResult {
  Mat<S> log_probs;  // [(B * frames_out) x classes]; invalid frames are zero
  int frames_out = 0;
  std::vector<int> out_lengths;
  ForwardCache<S> cache;

  int num_classes() const { return static_cast<int>(log_probs.cols()); }

  auto sequence(int b) const {
    return log_probs.block(static_cast<Eigen::Index>(b) * frames_out, 0, out_lengths[static_cast<std::size_t>(b)],
                           log_probs.cols());
  }
};

namespace detail {

template <typename S>
Mat<S> pack_weight(const Mat<S>& w, const LayerSpec& spec) {
  const int in = spec.in_channels, kw = spec.kernel_width;
  Mat<S> p(spec.out_channels, spec.fan_in());
  for (int o = 0; o < spec.out_channels; ++o) {
    for (int c = 0; c < in; ++c) {
      for (int j = 0; j < kw; ++j) p(o, j * in + c) = w(o, c * kw + j);
    }
  }
  return p;
}

template <typename S>
Mat<S> unpack_weight(const Mat<S>& p, const LayerSpec& spec) {
  const int in = spec.in_channels, kw = spec.kernel_width;
  Mat<S> w(spec.out_channels, spec.fan_in());
  for (int o = 0; o < spec.out_channels; ++o) {
    for (int c = 0; c < in; ++c) {
      for (int j = 0; j < kw; ++j) w(o, c * kw + j) = p(o, j * in + c);
    }
  }
  return w;
}

// Overlapping view of the receptive fields: row t is the contiguous
// kw * in block starting at input row t * stride.
template <typename S>
auto patches(const S* input, int out_frames, const LayerSpec& spec) {
  using Strided = Eigen::Map<const Mat<S>, 0, Eigen::OuterStride<>>;
  return Strided(input, out_frames, spec.fan_in(), Eigen::OuterStride<>(spec.stride * spec.in_channels));
}

template <typename S>
void conv_forward(const S* input, int in_frames, const Mat<S>& packed, const Vec<S>& bias, const LayerSpec& spec,
                  Mat<S>& out) {
  const int t_out = (in_frames - spec.kernel_width) / spec.stride + 1;
  out.resize(t_out, spec.out_channels);
  out.noalias() = patches(input, t_out, spec) * packed.transpose();
  out.rowwise() += bias.transpose();
  if (spec.activation == Activation::Relu) out = out.cwiseMax(S(0));
}

template <typename S>
void log_softmax_rows(Mat<S>& m) {
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    auto row = m.row(t);
    const S mx = row.maxCoeff();
    const S lse = mx + std::log((row.array() - mx).exp().sum());
    row.array() -= lse;
  }
}

}  // namespace detail

/// Runs the network. With keep_cache, activations needed to backpropagate
/// into layers >= freeze_k are retained in the result's cache.
template <typename S>
ForwardResult<S> forward(const ModelParams<S>& params, const PaddedBatch<S>& batch, bool keep_cache = false,
                         int freeze_k = 0, BufferMeter* meter = nullptr) {
  const auto& cfg = params.config;
  const int L = cfg.num_layers();
  if (batch.channels() != cfg.n_mels) {
    throw Error("batch has " + std::to_string(batch.channels()) + " channels, model expects " +
                std::to_string(cfg.n_mels));
  }
  if (batch.data.rows() != static_cast<Eigen::Index>(batch.size()) * batch.frames) {
    throw Error("batch data rows do not match size * frames");
  }
  if (freeze_k < 0 || freeze_k > L) throw Error("freeze boundary out of range");

  ForwardResult<S> res;
  res.cache.freeze_k = freeze_k;
  res.cache.packed_weights.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    res.cache.packed_weights.push_back(detail::pack_weight(params.layers[static_cast<std::size_t>(l)].weight,
                                                           cfg.layers[static_cast<std::size_t>(l)]));
  }
  const int max_frames_out = output_length(batch.frames, cfg);
  for (int len : batch.lengths) {
    if (len > batch.frames || len < 0) throw Error("sequence length exceeds padded frame count");
    res.out_lengths.push_back(output_length(len, cfg));
  }
  res.frames_out = max_frames_out;
  const int C = cfg.num_classes();
  res.log_probs = Mat<S>::Zero(static_cast<Eigen::Index>(batch.size()) * max_frames_out, C);
  if (keep_cache) {
    res.cache.inputs.resize(static_cast<std::size_t>(batch.size()));
    res.cache.log_probs.resize(static_cast<std::size_t>(batch.size()));
  }

  for (int b = 0; b < batch.size(); ++b) {
    const int len = batch.lengths[static_cast<std::size_t>(b)];
    const S* cur = batch.data.data() + static_cast<Eigen::Index>(b) * batch.frames * batch.channels();
    int cur_frames = len;
    Tracked<S> held;  // activation feeding the next layer when it is not cached
    std::vector<Tracked<S>> cached;
    cached.reserve(static_cast<std::size_t>(L) + 1);
    if (keep_cache && freeze_k == 0) {
      cached.emplace_back(Mat<S>(Eigen::Map<const Mat<S>>(cur, len, batch.channels())), meter);
      cur = cached.back()->data();
    }
    for (int l = 0; l < L; ++l) {
      const auto& spec = cfg.layers[static_cast<std::size_t>(l)];
      const int t_out = (cur_frames - spec.kernel_width) / spec.stride + 1;
      Tracked<S> out(t_out, spec.out_channels, meter);
      detail::conv_forward(cur, cur_frames, res.cache.packed_weights[static_cast<std::size_t>(l)],
                           params.layers[static_cast<std::size_t>(l)].bias, spec, *out);
      cur_frames = t_out;
      if (l == L - 1) {
        detail::log_softmax_rows(*out);
        res.log_probs.block(static_cast<Eigen::Index>(b) * max_frames_out, 0, t_out, C) = *out;
        if (keep_cache) res.cache.log_probs[static_cast<std::size_t>(b)] = std::move(out);
      } else if (keep_cache && l + 1 >= freeze_k) {
        cached.push_back(std::move(out));
        cur = cached.back()->data();
      } else {
        held = std::move(out);
        cur = held->data();
      }
    }
    if (keep_cache) res.cache.inputs[static_cast<std::size_t>(b)] = std::move(cached);
  }
  return res;
}

template <typename S>
struct LayerGrad {
  Tracked<S> weight;  // canonical [out x (in * kw)] layout
  Tracked<S> bias;    // [out x 1]
};

/// Per-layer gradients; frozen layers hold no value.
template <typename S>
struct Gradients {
  std::vector<std::optional<LayerGrad<S>>> layers;

  bool empty() const {
    return std::none_of(layers.begin(), layers.end(), [](const auto& g) { return g.has_value(); });
  }
  bool has(int layer) const {
    return layer >= 0 && layer < static_cast<int>(layers.size()) && layers[static_cast<std::size_t>(layer)].has_value();
  }
};

/// Backpropagates dLoss/dlog_probs (same shape as ForwardResult::log_probs)
/// through log-softmax and every unfrozen layer. Input gradients are not
/// propagated below the lowest unfrozen layer.
template <typename S>
Gradients<S> backward(const ModelParams<S>& params, const ForwardResult<S>& fwd, const Mat<S>& grad_log_probs,
                      const FreezeMask& mask, BufferMeter* meter = nullptr) {
  const auto& cfg = params.config;
  const int L = cfg.num_layers();
  const int k = mask.k();
  if (mask.num_layers() != L) throw Error("freeze mask layer count does not match model");
  Gradients<S> grads;
  grads.layers.resize(static_cast<std::size_t>(L));
  if (mask.evaluation_only()) return grads;
  const auto& cache = fwd.cache;
  if (cache.empty()) throw Error("backward requires a forward pass with keep_cache");
  if (cache.freeze_k > k) {
    throw Error("cache was built for freeze boundary " + std::to_string(cache.freeze_k) +
                " but mask trains from layer " + std::to_string(k + 1));
  }
  if (grad_log_probs.rows() != fwd.log_probs.rows() || grad_log_probs.cols() != fwd.log_probs.cols()) {
    throw Error("gradient shape does not match forward output");
  }

  for (int l = k; l < L; ++l) {
    const auto& spec = cfg.layers[static_cast<std::size_t>(l)];
    grads.layers[static_cast<std::size_t>(l)] =
        LayerGrad<S>{Tracked<S>(Mat<S>::Zero(spec.out_channels, spec.fan_in()), meter),
                     Tracked<S>(Mat<S>::Zero(spec.out_channels, 1), meter)};
  }
  std::vector<Mat<S>> packed_grads(static_cast<std::size_t>(L));
  for (int l = k; l < L; ++l) {
    const auto& spec = cfg.layers[static_cast<std::size_t>(l)];
    packed_grads[static_cast<std::size_t>(l)] = Mat<S>::Zero(spec.out_channels, spec.fan_in());
  }

  const int C = cfg.num_classes();
  for (std::size_t b = 0; b < cache.inputs.size(); ++b) {
    const auto& inputs = cache.inputs[b];
    const auto& lp = *cache.log_probs[b];
    const auto t_top = lp.rows();
    // log-softmax backward: dz = g - softmax * sum(g)
    Tracked<S> delta(
        Mat<S>(grad_log_probs.block(static_cast<Eigen::Index>(b) * fwd.frames_out, 0, t_top, C)), meter);
    {
      Vec<S> row_sums = delta->rowwise().sum();
      *delta -= (lp.array().exp().colwise() * row_sums.array()).matrix();
    }
    for (int l = L - 1; l >= k; --l) {
      const auto& spec = cfg.layers[static_cast<std::size_t>(l)];
      const auto& input = *inputs[static_cast<std::size_t>(l - cache.freeze_k)];
      const int t_out = static_cast<int>(delta->rows());
      if (spec.activation == Activation::Relu) {
        const auto& output = *inputs[static_cast<std::size_t>(l + 1 - cache.freeze_k)];
        *delta = (output.array() > S(0)).select(delta->array(), S(0));
      }
      const auto x = detail::patches(input.data(), t_out, spec);
      packed_grads[static_cast<std::size_t>(l)].noalias() += delta->transpose() * x;
      *grads.layers[static_cast<std::size_t>(l)]->bias += delta->colwise().sum().transpose();
      if (l > k) {
        const Mat<S> dpatch = *delta * cache.packed_weights[static_cast<std::size_t>(l)];
        Tracked<S> dinput(Mat<S>::Zero(input.rows(), input.cols()), meter);
        const Eigen::Index K = spec.fan_in();
        for (int t = 0; t < t_out; ++t) {
          Eigen::Map<Vec<S>>(dinput->data() + static_cast<Eigen::Index>(t) * spec.stride * spec.in_channels, K) +=
              dpatch.row(t).transpose();
        }
        delta = std::move(dinput);
      }
    }
  }
  for (int l = k; l < L; ++l) {
    *grads.layers[static_cast<std::size_t>(l)]->weight =
        detail::unpack_weight(packed_grads[static_cast<std::size_t>(l)], cfg.layers[static_cast<std::size_t>(l)]);
  }
  return grads;
}

/// Appends labels to the alphabet. New output rows (weights and bias) are
/// zero, old label rows are copied, and the blank row moves to the end.
template <typename S>
ModelParams<S> extend_alphabet(const ModelParams<S>& params, const std::vector<std::string>& new_labels) {
  auto labels = params.alphabet.labels();
  for (const auto& g : new_labels) {
    if (params.alphabet.contains(g)) throw Error("label '" + g + "' already in alphabet");
    labels.push_back(g);
  }
  ModelParams<S> out = params;
  out.alphabet = Alphabet(std::move(labels));  // rejects duplicates within new_labels
  const int old_labels = params.alphabet.size();
  const int added = static_cast<int>(new_labels.size());
  auto& spec = out.config.layers.back();
  spec.out_channels = out.alphabet.num_classes();
  const auto& old = params.layers.back();
  Layer<S> top{Mat<S>::Zero(spec.out_channels, spec.fan_in()), Vec<S>::Zero(spec.out_channels)};
  top.weight.topRows(old_labels) = old.weight.topRows(old_labels);
  top.bias.head(old_labels) = old.bias.head(old_labels);
  top.weight.row(old_labels + added) = old.weight.row(old_labels);
  top.bias(old_labels + added) = old.bias(old_labels);
  out.layers.back() = std::move(top);
  out.validate();
  return out;
}

}  // namespace w2l
