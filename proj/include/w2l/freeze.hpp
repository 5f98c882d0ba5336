// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "w2l/common.hpp"

namespace w2l {

/// The lowest k layers are frozen; the remaining ones train.
/// Layers are 0-based in code (layer index i is "layer i+1" in logs).
class FreezeMask {
public:
  FreezeMask() = default;
  FreezeMask(int k, int num_layers) : k_(k), num_layers_(num_layers) {
    if (num_layers < 1) throw Error("freeze mask needs at least one layer");
    if (k < 0 || k > num_layers) {
      throw Error("freeze count k=" + std::to_string(k) + " out of range [0, " + std::to_string(num_layers) + "]");
    }
  }

  int k() const { return k_; }
  int num_layers() const { return num_layers_; }
  bool frozen(int layer) const { return layer < k_; }
  bool trainable(int layer) const { return layer >= k_ && layer < num_layers_; }
  int trainable_count() const { return num_layers_ - k_; }
  bool evaluation_only() const { return k_ == num_layers_; }

  bool operator==(const FreezeMask&) const = default;

private:
  int k_ = 0;
  int num_layers_ = 0;
};

}  // namespace w2l
