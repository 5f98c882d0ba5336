// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <numbers>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/wav.hpp"

namespace w2l {

namespace detail {

// Zeroth-order modified Bessel function of the first kind (power series).
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace detail

/// Windowed-sinc polyphase resampler (Kaiser beta 8, 32 taps per phase).
/// Each phase is normalized to unit DC gain and the signal is edge-extended,
/// so constant inputs stay constant.
class Resampler {
public:
  static constexpr int kTaps = 32;
  static constexpr double kBeta = 8.0;

  Resampler(int source_rate, int target_rate) : source_(source_rate), target_(target_rate) {
    if (source_rate <= 0 || target_rate <= 0) throw Error("sample rates must be positive");
    const auto g = std::gcd(source_rate, target_rate);
    up_ = target_rate / g;
    down_ = source_rate / g;
    // Cutoff relative to the input Nyquist; narrows when decimating.
    const double cutoff = std::min(1.0, static_cast<double>(up_) / down_) * 0.95;
    const double i0beta = detail::bessel_i0(kBeta);
    const double half = kTaps / 2.0;
    table_.resize(static_cast<std::size_t>(up_) * kTaps);
    for (int phase = 0; phase < up_; ++phase) {
      const double frac = static_cast<double>(phase) / up_;
      double sum = 0.0;
      for (int k = 0; k < kTaps; ++k) {
        // tap k sits at input offset (k - half + 1) relative to floor(position)
        const double t = static_cast<double>(k) - half + 1.0 - frac;
        const double x = cutoff * t;
        const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
        const double r = t / half;
        const double win = std::abs(r) >= 1.0 ? 0.0 : detail::bessel_i0(kBeta * std::sqrt(1.0 - r * r)) / i0beta;
        const double h = cutoff * sinc * win;
        table_[static_cast<std::size_t>(phase) * kTaps + k] = h;
        sum += h;
      }
      for (int k = 0; k < kTaps; ++k) table_[static_cast<std::size_t>(phase) * kTaps + k] /= sum;
    }
  }

  Waveform operator()(const Waveform& w) const {
    if (w.sample_rate != source_) throw Error("resampler source rate mismatch");
    Waveform out;
    out.sample_rate = target_;
    if (source_ == target_) {
      out.samples = w.samples;
      return out;
    }
    const auto n_in = static_cast<std::int64_t>(w.samples.size());
    if (n_in == 0) return out;
    const auto n_out = static_cast<std::int64_t>(
        std::llround(static_cast<double>(n_in) * target_ / static_cast<double>(source_)));
    out.samples.resize(static_cast<std::size_t>(n_out));
    for (std::int64_t n = 0; n < n_out; ++n) {
      const std::int64_t num = n * down_;
      const std::int64_t base = num / up_;
      const auto phase = static_cast<std::size_t>(num % up_);
      const double* h = table_.data() + phase * kTaps;
      double acc = 0.0;
      for (int k = 0; k < kTaps; ++k) {
        const std::int64_t idx = std::clamp<std::int64_t>(base + k - kTaps / 2 + 1, 0, n_in - 1);
        acc += h[k] * w.samples[static_cast<std::size_t>(idx)];
      }
      out.samples[static_cast<std::size_t>(n)] = acc;
    }
    return out;
  }

private:
  int source_;
  int target_;
  int up_ = 1;
  int down_ = 1;
  std::vector<double> table_;
};

inline Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw Error("target rate must be positive");
  if (w.sample_rate == target_rate) return w;
  return Resampler(w.sample_rate, target_rate)(w);
}

}  // namespace w2l
