// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/freeze.hpp"
#include "w2l/net.hpp"

namespace w2l {

/// Freezes layers 1..k; k equal to the layer count means evaluation only.
inline FreezeMask make_freeze_mask(const ModelConfig& config, int k) { return FreezeMask(k, config.num_layers()); }

/// Redraws the given 0-based layers Xavier-uniform (zero biases); all other
/// layers are returned bit-identical.
template <typename S>
ModelParams<S> reinit_layers(const ModelParams<S>& params, const std::vector<int>& layers, std::uint64_t seed) {
  ModelParams<S> out = params;
  for (int l : layers) {
    if (l < 0 || l >= params.num_layers()) {
      throw Error("cannot reinitialize layer index " + std::to_string(l) + " of " +
                  std::to_string(params.num_layers()));
    }
    out.layers[static_cast<std::size_t>(l)] = xavier_layer<S>(params.config.layers[static_cast<std::size_t>(l)], seed, l);
  }
  return out;
}

/// 0-based indices of the layers a mask leaves trainable.
inline std::vector<int> trainable_layers(const FreezeMask& mask) {
  std::vector<int> out;
  for (int l = mask.k(); l < mask.num_layers(); ++l) out.push_back(l);
  return out;
}

}  // namespace w2l
