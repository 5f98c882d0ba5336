// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>

#include "w2l/common.hpp"

namespace w2l {

/// Counts bytes held by activation and gradient buffers during a training
/// step. Buffers report themselves through Tracked<S>.
class BufferMeter {
public:
  void acquire(std::size_t bytes) {
    current_ += bytes;
    peak_ = std::max(peak_, current_);
    total_ += bytes;
  }
  void release(std::size_t bytes) { current_ -= std::min(bytes, current_); }

  /// Starts a new measurement window; outstanding bytes stay counted.
  void reset_peak() {
    peak_ = current_;
    total_ = 0;
  }

  std::size_t current() const { return current_; }
  std::size_t peak() const { return peak_; }
  std::size_t total_allocated() const { return total_; }

private:
  std::size_t current_ = 0;
  std::size_t peak_ = 0;
  std::size_t total_ = 0;
};

/// A matrix whose storage is reported to an optional BufferMeter for as long
/// as it is alive.
template <typename S>
class Tracked {
public:
  Tracked() = default;
  Tracked(Eigen::Index rows, Eigen::Index cols, BufferMeter* meter) : mat_(rows, cols), meter_(meter) {
    charge();
  }
  explicit Tracked(Mat<S> m, BufferMeter* meter = nullptr) : mat_(std::move(m)), meter_(meter) { charge(); }

  Tracked(const Tracked& o) : mat_(o.mat_), meter_(o.meter_) { charge(); }
  Tracked(Tracked&& o) noexcept : mat_(std::move(o.mat_)), meter_(o.meter_), charged_(o.charged_) {
    o.charged_ = 0;
    o.meter_ = nullptr;
  }
  Tracked& operator=(Tracked o) noexcept {
    swap(o);
    return *this;
  }
  ~Tracked() {
    if (meter_ != nullptr) meter_->release(charged_);
  }

  void swap(Tracked& o) noexcept {
    mat_.swap(o.mat_);
    std::swap(meter_, o.meter_);
    std::swap(charged_, o.charged_);
  }

  Mat<S>& operator*() { return mat_; }
  const Mat<S>& operator*() const { return mat_; }
  Mat<S>* operator->() { return &mat_; }
  const Mat<S>* operator->() const { return &mat_; }

private:
  void charge() {
    charged_ = static_cast<std::size_t>(mat_.size()) * sizeof(S);
    if (meter_ != nullptr) meter_->acquire(charged_);
  }

  Mat<S> mat_;
  BufferMeter* meter_ = nullptr;
  std::size_t charged_ = 0;
};

}  // namespace w2l
