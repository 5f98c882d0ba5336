// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "w2l/common.hpp"

namespace w2l {

class InfeasibleAlignment : public Error {
public:
  using Error::Error;
};

/// Merges adjacent repeats, then removes blanks.
inline LabelSeq collapse(const std::vector<int>& path, int blank) {
  LabelSeq out;
  int prev = -1;
  for (int c : path) {
    if (c != prev && c != blank) out.push_back(c);
    prev = c;
  }
  return out;
}

/// Fewest frames that can emit label: one per symbol plus a blank between
/// each pair of equal neighbours.
inline int min_ctc_frames(const LabelSeq& label) {
  int n = static_cast<int>(label.size());
  for (std::size_t i = 1; i < label.size(); ++i) n += label[i] == label[i - 1] ? 1 : 0;
  return n;
}

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace detail

struct CtcResult {
  double loss = 0.0;  // -ln P(label | input)
  Mat<double> grad;   // d loss / d log_probs, [T x C]
};

/// CTC negative log-likelihood and its exact gradient with respect to the
/// per-frame log-probabilities, by forward-backward over the blank-augmented
/// label. log_probs is [T x C]; blank is a class index.
template <typename Derived>
CtcResult ctc_loss_grad(const Eigen::MatrixBase<Derived>& log_probs, const LabelSeq& label, int blank) {
  using detail::kNegInf;
  using detail::log_add;
  const int T = static_cast<int>(log_probs.rows());
  const int C = static_cast<int>(log_probs.cols());
  if (blank < 0 || blank >= C) throw Error("blank index out of range");
  for (int l : label) {
    if (l < 0 || l >= C || l == blank) throw Error("label index " + std::to_string(l) + " invalid for CTC");
  }
  if (T < min_ctc_frames(label) || T == 0) {
    throw InfeasibleAlignment("infeasible alignment: " + std::to_string(T) + " frames for label needing " +
                              std::to_string(std::max(1, min_ctc_frames(label))));
  }
  const Mat<double> y = log_probs.template cast<double>();
  const int S = 2 * static_cast<int>(label.size()) + 1;
  auto sym = [&](int s) { return s % 2 == 0 ? blank : label[static_cast<std::size_t>(s / 2)]; };
  auto can_skip = [&](int s) { return s >= 2 && sym(s) != blank && sym(s) != sym(s - 2); };

  Mat<double> alpha = Mat<double>::Constant(T, S, kNegInf);
  Mat<double> beta = Mat<double>::Constant(T, S, kNegInf);
  alpha(0, 0) = y(0, blank);
  if (S > 1) alpha(0, 1) = y(0, sym(1));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha(t - 1, s);
      if (s >= 1) a = log_add(a, alpha(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, alpha(t - 1, s - 2));
      if (a != kNegInf) alpha(t, s) = a + y(t, sym(s));
    }
  }
  beta(T - 1, S - 1) = y(T - 1, blank);
  if (S > 1) beta(T - 1, S - 2) = y(T - 1, sym(S - 2));
  for (int t = T - 2; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      double b = beta(t + 1, s);
      if (s + 1 < S) b = log_add(b, beta(t + 1, s + 1));
      if (s + 2 < S && can_skip(s + 2)) b = log_add(b, beta(t + 1, s + 2));
      if (b != kNegInf) beta(t, s) = b + y(t, sym(s));
    }
  }
  double log_p = alpha(T - 1, S - 1);
  if (S > 1) log_p = log_add(log_p, alpha(T - 1, S - 2));
  if (!std::isfinite(log_p)) throw InfeasibleAlignment("infeasible alignment: label has zero probability");

  CtcResult r;
  r.loss = -log_p;
  r.grad = Mat<double>::Zero(T, C);
  std::vector<double> occ(static_cast<std::size_t>(C));
  for (int t = 0; t < T; ++t) {
    std::fill(occ.begin(), occ.end(), kNegInf);
    for (int s = 0; s < S; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      if (ab == kNegInf) continue;
      auto& o = occ[static_cast<std::size_t>(sym(s))];
      o = log_add(o, ab - y(t, sym(s)));
    }
    for (int c = 0; c < C; ++c) {
      const double o = occ[static_cast<std::size_t>(c)];
      if (o != kNegInf) r.grad(t, c) = -std::exp(o - log_p);
    }
  }
  return r;
}

/// ln P(label | input) by the forward recursion alone; -inf when no path
/// emits the label.
template <typename Derived>
double ctc_log_prob(const Eigen::MatrixBase<Derived>& log_probs, const LabelSeq& label, int blank) {
  using detail::kNegInf;
  using detail::log_add;
  const int T = static_cast<int>(log_probs.rows());
  if (T == 0) return label.empty() ? 0.0 : kNegInf;
  if (T < min_ctc_frames(label)) return kNegInf;
  const int S = 2 * static_cast<int>(label.size()) + 1;
  auto sym = [&](int s) { return s % 2 == 0 ? blank : label[static_cast<std::size_t>(s / 2)]; };
  std::vector<double> alpha(static_cast<std::size_t>(S), kNegInf), next(alpha.size());
  alpha[0] = static_cast<double>(log_probs(0, blank));
  if (S > 1) alpha[1] = static_cast<double>(log_probs(0, sym(1)));
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double a = alpha[static_cast<std::size_t>(s)];
      if (s >= 1) a = log_add(a, alpha[static_cast<std::size_t>(s - 1)]);
      if (s >= 2 && sym(s) != blank && sym(s) != sym(s - 2)) a = log_add(a, alpha[static_cast<std::size_t>(s - 2)]);
      next[static_cast<std::size_t>(s)] = a == kNegInf ? kNegInf : a + static_cast<double>(log_probs(t, sym(s)));
    }
    std::swap(alpha, next);
  }
  return S > 1 ? log_add(alpha[static_cast<std::size_t>(S - 1)], alpha[static_cast<std::size_t>(S - 2)]) : alpha[0];
}

/// Reference CTC loss by enumerating all C^T frame paths.
template <typename Derived>
double ctc_brute_force(const Eigen::MatrixBase<Derived>& log_probs, const LabelSeq& label, int blank) {
  const int T = static_cast<int>(log_probs.rows());
  const int C = static_cast<int>(log_probs.cols());
  const double paths = std::pow(static_cast<double>(C), T);
  if (paths > 1e7) throw Error("brute-force CTC guard exceeded: C^T = " + std::to_string(paths));
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  double log_p = detail::kNegInf;
  const auto total = static_cast<std::int64_t>(paths);
  for (std::int64_t n = 0; n < total; ++n) {
    std::int64_t rem = n;
    double lp = 0.0;
    for (int t = 0; t < T; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(rem % C);
      rem /= C;
      lp += static_cast<double>(log_probs(t, path[static_cast<std::size_t>(t)]));
    }
    if (collapse(path, blank) == label) log_p = detail::log_add(log_p, lp);
  }
  if (!std::isfinite(log_p)) throw InfeasibleAlignment("infeasible alignment: no path collapses to label");
  return -log_p;
}

}  // namespace w2l
