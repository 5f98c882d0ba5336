// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "w2l/ctc.hpp"
#include "w2l/decode.hpp"
#include "w2l/metrics.hpp"
#include "w2l/net.hpp"
#include "w2l/train.hpp"

namespace w2l {

/// Per-class log probabilities for each utterance, computed in length-sorted
/// batches. Utterances too short for the network get an empty matrix.
inline std::vector<Mat<float>> infer_log_probs(const ModelParams<float>& params, const std::vector<Utterance>& data,
                                               int batch_size = 16) {
  std::vector<Mat<float>> out(data.size());
  const int min_frames = min_input_frames(params.config);
  std::vector<int> order;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].features.rows() >= min_frames) order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return data[static_cast<std::size_t>(a)].features.rows() < data[static_cast<std::size_t>(b)].features.rows();
  });
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(std::max(1, batch_size))) {
    const auto end = std::min(order.size(), start + static_cast<std::size_t>(std::max(1, batch_size)));
    std::vector<const Mat<double>*> feats;
    for (auto i = start; i < end; ++i) feats.push_back(&data[static_cast<std::size_t>(order[i])].features);
    const auto fwd = forward(params, make_batch<float>(feats));
    for (auto i = start; i < end; ++i) out[static_cast<std::size_t>(order[i])] = fwd.sequence(static_cast<int>(i - start));
  }
  return out;
}

struct EvalRow {
  std::string id;
  std::string ref;
  std::string greedy;
  std::string beam;
  double greedy_ler = 0.0, greedy_wer = 0.0;
  double beam_ler = 0.0, beam_wer = 0.0;
  double loss = std::numeric_limits<double>::quiet_NaN();  // NaN when CTC is infeasible
};

struct EvalReport {
  std::vector<EvalRow> rows;
  ErrorRateSummary greedy, beam;
  double mean_loss = std::numeric_limits<double>::quiet_NaN();
  int loss_count = 0;
  int too_short = 0;  // utterances the network cannot process; scored as empty hypotheses
};

/// Greedy and beam decoding plus CTC loss for every utterance.
inline EvalReport evaluate(const ModelParams<float>& params, const std::vector<Utterance>& data,
                           const DecoderConfig& decoder, int batch_size = 16) {
  EvalReport rep;
  const auto lps = infer_log_probs(params, data, batch_size);
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& u = data[i];
    EvalRow row;
    row.id = u.id;
    row.ref = u.text;
    if (lps[i].rows() == 0) {
      ++rep.too_short;
    } else {
      const Mat<double> lp = lps[i].cast<double>();
      row.greedy = greedy_decode(lp, params.alphabet).transcript;
      row.beam = beam_search_decode(lp, params.alphabet, decoder).transcript;
      try {
        row.loss = ctc_loss_grad(lp, u.labels, params.alphabet.blank()).loss;
        loss_sum += row.loss;
        ++rep.loss_count;
      } catch (const InfeasibleAlignment&) {
      }
    }
    row.greedy_ler = ler(row.ref, row.greedy);
    row.greedy_wer = wer(row.ref, row.greedy);
    row.beam_ler = ler(row.ref, row.beam);
    row.beam_wer = wer(row.ref, row.beam);
    rep.greedy.add(row.ref, row.greedy);
    rep.beam.add(row.ref, row.beam);
    rep.rows.push_back(std::move(row));
  }
  if (rep.loss_count > 0) rep.mean_loss = loss_sum / rep.loss_count;
  return rep;
}

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// One row per utterance, then "mean" and "pooled" summary rows.
inline void write_eval_csv(std::ostream& out, const EvalReport& rep) {
  using detail::csv_quote;
  out << "id,ref,greedy_hyp,greedy_ler,greedy_wer,beam_hyp,beam_ler,beam_wer,loss\n";
  out << std::setprecision(6);
  for (const auto& r : rep.rows) {
    out << csv_quote(r.id) << ',' << csv_quote(r.ref) << ',' << csv_quote(r.greedy) << ',' << r.greedy_ler << ','
        << r.greedy_wer << ',' << csv_quote(r.beam) << ',' << r.beam_ler << ',' << r.beam_wer << ',';
    if (std::isfinite(r.loss)) out << r.loss;
    out << '\n';
  }
  out << "mean,,," << rep.greedy.mean_ler() << ',' << rep.greedy.mean_wer() << ",," << rep.beam.mean_ler() << ','
      << rep.beam.mean_wer() << ',';
  if (std::isfinite(rep.mean_loss)) out << rep.mean_loss;
  out << '\n';
  out << "pooled,,," << rep.greedy.pooled_ler() << ',' << rep.greedy.pooled_wer() << ",," << rep.beam.pooled_ler()
      << ',' << rep.beam.pooled_wer() << ",\n";
}

}  // namespace w2l
