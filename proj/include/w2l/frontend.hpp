// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/fft.hpp"
#include "w2l/resample.hpp"
#include "w2l/wav.hpp"

namespace w2l {

/// STFT/mel settings. A 32 ms window at 16 kHz is a 512-point FFT; the 8 ms
/// stride gives 75% overlap between successive frames.
struct FrontendConfig {
  int window_ms = 32;
  int stride_ms = 8;
  int fft_size = 512;
  int n_mels = 128;
  int sample_rate = 16000;
  double max_duration_s = 35.0;

  int window_samples() const { return window_ms * sample_rate / 1000; }
  int hop_samples() const { return stride_ms * sample_rate / 1000; }
  int num_bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (sample_rate <= 0 || window_ms <= 0 || stride_ms <= 0 || n_mels <= 0) {
      throw Error("frontend config values must be positive");
    }
    if (window_samples() != fft_size) throw Error("window_ms * sample_rate / 1000 must equal fft_size");
    if ((fft_size & (fft_size - 1)) != 0) throw Error("fft_size must be a power of two");
    if (stride_ms * 4 != window_ms) throw Error("stride_ms must be window_ms / 4 (75% overlap)");
  }
};

/// Normalized mel spectrogram, [num_frames x n_mels].
struct Features {
  Mat<double> frames;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int n_mels() const { return static_cast<int>(frames.cols()); }
};

inline int num_stft_frames(std::size_t num_samples, const FrontendConfig& cfg) {
  const auto n = static_cast<long long>(num_samples);
  if (n < cfg.fft_size) return 0;
  return static_cast<int>((n - cfg.fft_size) / cfg.hop_samples() + 1);
}

/// Periodic Hann window of length n.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  }
  return w;
}

/// Power spectrogram |DFT(hann * frame)|^2, [num_frames x fft_size/2+1].
/// Frame t covers samples [t*hop, t*hop + fft_size); no centering or padding.
inline Mat<double> stft_power(const Waveform& w, const FrontendConfig& cfg) {
  cfg.validate();
  if (w.samples.size() < static_cast<std::size_t>(cfg.fft_size)) {
    throw Error("utterance too short: " + std::to_string(w.samples.size()) + " samples < window of " +
                std::to_string(cfg.fft_size));
  }
  const int frames = num_stft_frames(w.samples.size(), cfg);
  const int hop = cfg.hop_samples();
  const auto window = hann_window(cfg.fft_size);
  Mat<double> out(frames, cfg.num_bins());
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.fft_size));
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * static_cast<std::size_t>(hop);
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = w.samples[start + i] * window[i];
    fft_inplace(buf);
    for (int k = 0; k < cfg.num_bins(); ++k) out(t, k) = std::norm(buf[static_cast<std::size_t>(k)]);
  }
  return out;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Triangular HTK-mel filterbank, [n_mels x fft_size/2+1], spanning 0 Hz to
/// Nyquist. Triangles are sampled at FFT bin frequencies; a filter narrower
/// than the bin spacing that would otherwise catch no bin gets unit weight
/// on the bin nearest its center.
inline Mat<double> mel_filterbank(const FrontendConfig& cfg) {
  const int bins = cfg.num_bins();
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
  }
  edges.front() = 0.0;
  edges.back() = nyquist;
  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
  Mat<double> fb = Mat<double>::Zero(cfg.n_mels, bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    bool any = false;
    for (int k = 0; k < bins; ++k) {
      const double f = k * bin_hz;
      const double up = (f - lo) / (center - lo);
      const double down = (hi - f) / (hi - center);
      const double v = std::max(0.0, std::min(up, down));
      fb(m, k) = v;
      any = any || v > 0.0;
    }
    if (!any) {
      const int nearest = std::clamp(static_cast<int>(std::lround(center / bin_hz)), 0, bins - 1);
      fb(m, nearest) = 1.0;
    }
  }
  return fb;
}

/// Projects a power spectrogram onto the mel filterbank.
inline Mat<double> mel_project(const Mat<double>& power, const FrontendConfig& cfg) {
  if (power.cols() != cfg.num_bins()) {
    throw Error("power spectrogram has " + std::to_string(power.cols()) + " bins, expected " +
                std::to_string(cfg.num_bins()));
  }
  return power * mel_filterbank(cfg).transpose();
}

inline constexpr double kZeroVarianceGuard = 1e-10;

/// Per-utterance scalar standardization: subtract the global mean and divide
/// by the population standard deviation. Near-constant input yields zeros.
inline Features normalize(const Mat<double>& mel) {
  Features f;
  const auto n = static_cast<double>(mel.size());
  if (n == 0) {
    f.frames = mel;
    return f;
  }
  const double mean = mel.sum() / n;
  const double var = (mel.array() - mean).square().sum() / n;
  const double sd = std::sqrt(var);
  if (sd < kZeroVarianceGuard) {
    f.frames = Mat<double>::Zero(mel.rows(), mel.cols());
  } else {
    f.frames = ((mel.array() - mean) / sd).matrix();
  }
  return f;
}

/// Full chain: resample to the configured rate, STFT power, mel, normalize.
inline Features extract_features(const Waveform& w, const FrontendConfig& cfg) {
  const Waveform at_rate = resample(w, cfg.sample_rate);
  return normalize(mel_project(stft_power(at_rate, cfg), cfg));
}

}  // namespace w2l
