// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/net.hpp"

namespace w2l {

/// Bin edges of fixed width covering [lo, hi], snapped outward to multiples
/// of the width.
inline std::vector<double> uniform_edges(double lo, double hi, double width) {
  if (!(width > 0)) throw Error("bin width must be positive");
  double a = std::floor(lo / width) * width;
  double b = std::ceil(hi / width) * width;
  if (b <= a) b = a + width;
  std::vector<double> edges;
  const auto n = static_cast<int>(std::llround((b - a) / width));
  for (int i = 0; i <= n; ++i) edges.push_back(a + i * width);
  return edges;
}

/// Fraction of values per bin [e_i, e_{i+1}); the last bin also holds its
/// right edge. Values outside the edges are clamped into the end bins.
template <typename Derived>
std::vector<double> histogram_fractions(const Eigen::DenseBase<Derived>& values, const std::vector<double>& edges) {
  if (edges.size() < 2) throw Error("histogram needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw Error("histogram edges must be strictly increasing");
  }
  const std::size_t bins = edges.size() - 1;
  std::vector<double> counts(bins, 0.0);
  const auto n = values.size();
  if (n == 0) return counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = static_cast<double>(values.derived().data()[i]);
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto bin = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    counts[static_cast<std::size_t>(bin)] += 1.0;
  }
  for (auto& c : counts) c /= static_cast<double>(n);
  return counts;
}

/// Default edges: 0.2-wide bins spanning the layer's weights.
template <typename S>
std::vector<double> default_weight_edges(const ModelParams<S>& params, int layer) {
  const auto& w = params.layers.at(static_cast<std::size_t>(layer)).weight;
  return uniform_edges(static_cast<double>(w.minCoeff()), static_cast<double>(w.maxCoeff()), 0.2);
}

/// Fraction of a layer's weights (biases excluded) in each bin.
template <typename S>
std::vector<double> weight_histogram(const ModelParams<S>& params, int layer, const std::vector<double>& edges) {
  if (layer < 0 || layer >= params.num_layers()) throw Error("layer index out of range");
  return histogram_fractions(params.layers[static_cast<std::size_t>(layer)].weight, edges);
}

struct LayerDiff {
  int layer = 0;         // 0-based
  bool compared = false; // false when the layer was skipped
  double max_abs = 0.0;
  double mean_abs = 0.0;
  std::vector<double> edges;
  std::vector<double> fractions;
};

/// Elementwise |a - b| statistics per layer. An output layer whose class
/// count differs between the two models is skipped; any other shape
/// difference is an error.
template <typename S>
std::vector<LayerDiff> weight_diff(const ModelParams<S>& a, const ModelParams<S>& b, double bin_width = 0.01) {
  if (a.num_layers() != b.num_layers()) throw Error("models have different layer counts");
  std::vector<LayerDiff> out;
  const int L = a.num_layers();
  std::vector<Mat<double>> diffs(static_cast<std::size_t>(L));
  double global_max = 0.0;
  for (int l = 0; l < L; ++l) {
    const auto& wa = a.layers[static_cast<std::size_t>(l)].weight;
    const auto& wb = b.layers[static_cast<std::size_t>(l)].weight;
    LayerDiff d;
    d.layer = l;
    if (wa.rows() != wb.rows() || wa.cols() != wb.cols()) {
      if (l == L - 1 && wa.cols() == wb.cols()) {
        out.push_back(d);
        continue;
      }
      throw Error("layer " + std::to_string(l + 1) + " shapes differ");
    }
    diffs[static_cast<std::size_t>(l)] = (wa.template cast<double>() - wb.template cast<double>()).cwiseAbs();
    const auto& dm = diffs[static_cast<std::size_t>(l)];
    d.compared = true;
    d.max_abs = dm.size() ? dm.maxCoeff() : 0.0;
    d.mean_abs = dm.size() ? dm.mean() : 0.0;
    global_max = std::max(global_max, d.max_abs);
    out.push_back(d);
  }
  const auto edges = uniform_edges(0.0, std::max(global_max, bin_width), bin_width);
  for (auto& d : out) {
    if (!d.compared) continue;
    d.edges = edges;
    d.fractions = histogram_fractions(diffs[static_cast<std::size_t>(d.layer)], edges);
  }
  return out;
}

/// One output neuron's filter: grid[tap][in_channel].
struct FilterGrid {
  int neuron = 0;
  Mat<double> weights;                // [kw x in]
  std::optional<Mat<double>> diff;    // weights - other, when a second model is given
};

template <typename S>
std::vector<FilterGrid> export_filters(const ModelParams<S>& params, int layer, const ModelParams<S>* other = nullptr) {
  if (layer < 0 || layer >= params.num_layers()) throw Error("layer index out of range");
  const auto& spec = params.config.layers[static_cast<std::size_t>(layer)];
  const auto& w = params.layers[static_cast<std::size_t>(layer)].weight;
  const Mat<S>* ow = nullptr;
  if (other != nullptr) {
    ow = &other->layers.at(static_cast<std::size_t>(layer)).weight;
    if (ow->rows() != w.rows() || ow->cols() != w.cols()) throw Error("filter shapes differ between models");
  }
  std::vector<FilterGrid> out;
  for (int o = 0; o < spec.out_channels; ++o) {
    FilterGrid g;
    g.neuron = o;
    g.weights.resize(spec.kernel_width, spec.in_channels);
    for (int c = 0; c < spec.in_channels; ++c) {
      for (int j = 0; j < spec.kernel_width; ++j) g.weights(j, c) = static_cast<double>(w(o, c * spec.kernel_width + j));
    }
    if (ow != nullptr) {
      Mat<double> d(spec.kernel_width, spec.in_channels);
      for (int c = 0; c < spec.in_channels; ++c) {
        for (int j = 0; j < spec.kernel_width; ++j) {
          d(j, c) = static_cast<double>(w(o, c * spec.kernel_width + j)) -
                    static_cast<double>((*ow)(o, c * spec.kernel_width + j));
        }
      }
      g.diff = std::move(d);
    }
    out.push_back(std::move(g));
  }
  return out;
}

namespace detail {

inline std::string shortest_repr(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace detail

/// CSV columns: neuron,tap,channel,weight[,diff]. Values use the shortest
/// representation that round-trips exactly.
inline void write_filters_csv(std::ostream& out, const std::vector<FilterGrid>& grids) {
  const bool with_diff = !grids.empty() && grids.front().diff.has_value();
  out << "neuron,tap,channel,weight" << (with_diff ? ",diff" : "") << '\n';
  for (const auto& g : grids) {
    for (Eigen::Index j = 0; j < g.weights.rows(); ++j) {
      for (Eigen::Index c = 0; c < g.weights.cols(); ++c) {
        out << g.neuron << ',' << j << ',' << c << ',' << detail::shortest_repr(g.weights(j, c));
        if (with_diff) out << ',' << detail::shortest_repr((*g.diff)(j, c));
        out << '\n';
      }
    }
  }
}

/// Parses write_filters_csv output back into grids.
inline std::vector<FilterGrid> read_filters_csv(std::istream& in, int kernel_width, int in_channels) {
  std::string line;
  if (!std::getline(in, line)) throw Error("empty filter CSV");
  const bool with_diff = line.find(",diff") != std::string::npos;
  std::vector<FilterGrid> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    std::vector<std::string> cols;
    while (std::getline(ss, f, ',')) cols.push_back(f);
    if (cols.size() != (with_diff ? 5u : 4u)) throw Error("malformed filter CSV row: " + line);
    const int neuron = std::stoi(cols[0]);
    if (out.empty() || out.back().neuron != neuron) {
      FilterGrid g;
      g.neuron = neuron;
      g.weights = Mat<double>::Zero(kernel_width, in_channels);
      if (with_diff) g.diff = Mat<double>::Zero(kernel_width, in_channels);
      out.push_back(std::move(g));
    }
    auto& g = out.back();
    const int j = std::stoi(cols[1]);
    const int c = std::stoi(cols[2]);
    if (j < 0 || j >= kernel_width || c < 0 || c >= in_channels) throw Error("filter CSV index out of range");
    g.weights(j, c) = std::stod(cols[3]);
    if (with_diff) (*g.diff)(j, c) = std::stod(cols[4]);
  }
  return out;
}

}  // namespace w2l
