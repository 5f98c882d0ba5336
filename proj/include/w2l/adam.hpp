// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/freeze.hpp"
#include "w2l/net.hpp"

namespace w2l {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
struct AdamMoments {
  Mat<S> m_weight, v_weight;
  Vec<S> m_bias, v_bias;
};

/// Moments exist only for trainable layers.
template <typename S>
struct AdamState {
  AdamHyper hyper;
  std::uint64_t step = 0;
  std::vector<std::optional<AdamMoments<S>>> layers;

  static AdamState fresh(const ModelParams<S>& params, const FreezeMask& mask, AdamHyper hyper = {}) {
    if (mask.num_layers() != params.num_layers()) throw Error("freeze mask layer count does not match model");
    AdamState st;
    st.hyper = hyper;
    st.layers.resize(static_cast<std::size_t>(params.num_layers()));
    for (int l = 0; l < params.num_layers(); ++l) {
      if (mask.frozen(l)) continue;
      const auto& p = params.layers[static_cast<std::size_t>(l)];
      st.layers[static_cast<std::size_t>(l)] =
          AdamMoments<S>{Mat<S>::Zero(p.weight.rows(), p.weight.cols()), Mat<S>::Zero(p.weight.rows(), p.weight.cols()),
                         Vec<S>::Zero(p.bias.size()), Vec<S>::Zero(p.bias.size())};
    }
    return st;
  }
};

namespace detail {

template <typename S, typename PDerived, typename GDerived, typename MDerived, typename VDerived>
void adam_update(Eigen::DenseBase<PDerived>& p, const Eigen::DenseBase<GDerived>& g, Eigen::DenseBase<MDerived>& m,
                 Eigen::DenseBase<VDerived>& v, const AdamHyper& h, double c1, double c2) {
  const auto b1 = static_cast<S>(h.beta1), b2 = static_cast<S>(h.beta2);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const S gi = g.derived().data()[i];
    S& mi = m.derived().data()[i];
    S& vi = v.derived().data()[i];
    mi = b1 * mi + (S(1) - b1) * gi;
    vi = b2 * vi + (S(1) - b2) * gi * gi;
    const double mhat = static_cast<double>(mi) / c1;
    const double vhat = static_cast<double>(vi) / c2;
    auto& pi = p.derived().data()[i];
    pi = static_cast<S>(static_cast<double>(pi) - h.lr * mhat / (std::sqrt(vhat) + h.eps));
  }
}

}  // namespace detail

/// One bias-corrected Adam update. Gradients must be present for exactly the
/// layers that carry optimizer state; frozen layers are untouched.
template <typename S>
void adam_step(ModelParams<S>& params, const Gradients<S>& grads, AdamState<S>& state) {
  const int L = params.num_layers();
  if (static_cast<int>(state.layers.size()) != L || static_cast<int>(grads.layers.size()) != L) {
    throw Error("optimizer state / gradients do not match model layer count");
  }
  for (int l = 0; l < L; ++l) {
    const bool has_state = state.layers[static_cast<std::size_t>(l)].has_value();
    const bool has_grad = grads.has(l);
    if (has_grad && !has_state) {
      throw Error("gradient supplied for frozen layer " + std::to_string(l + 1));
    }
    if (!has_grad && has_state) throw Error("missing gradient for trainable layer " + std::to_string(l + 1));
    if (has_grad) {
      const auto& g = *grads.layers[static_cast<std::size_t>(l)];
      const auto& p = params.layers[static_cast<std::size_t>(l)];
      if (g.weight->rows() != p.weight.rows() || g.weight->cols() != p.weight.cols() ||
          g.bias->size() != p.bias.size()) {
        throw Error("gradient shape mismatch at layer " + std::to_string(l + 1));
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.hyper.beta1, t);
  const double c2 = 1.0 - std::pow(state.hyper.beta2, t);
  for (int l = 0; l < L; ++l) {
    auto& st = state.layers[static_cast<std::size_t>(l)];
    if (!st) continue;
    auto& p = params.layers[static_cast<std::size_t>(l)];
    const auto& g = *grads.layers[static_cast<std::size_t>(l)];
    detail::adam_update<S>(p.weight, *g.weight, st->m_weight, st->v_weight, state.hyper, c1, c2);
    detail::adam_update<S>(p.bias, *g.bias, st->m_bias, st->v_bias, state.hyper, c1, c2);
  }
}

}  // namespace w2l
