// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "w2l/alphabet.hpp"
#include "w2l/common.hpp"
#include "w2l/ctc.hpp"
#include "w2l/lm.hpp"

namespace w2l {

// Decoding scores live in the natural-log domain:
//
//   total = ln P_acoustic(prefix)
//         + w_lm * ln(10) * sum_words log10 P_lm(word | history)
//         + w_valid_word * (number of words found in the LM vocabulary)
//
// P_acoustic sums over every frame path collapsing to the prefix. Words are
// scored when a space is emitted and, for the last word, at the end of the
// utterance. Without an LM both word terms are zero.
struct DecoderConfig {
  int beam_width = 64;
  double w_lm = 0.8;
  double w_valid_word = 2.3;
  const NGramModel* lm = nullptr;

  void validate() const {
    if (beam_width < 1) throw Error("beam width must be >= 1");
    if (!std::isfinite(w_lm) || !std::isfinite(w_valid_word)) throw Error("decoder weights must be finite");
  }
};

struct DecodeResult {
  LabelSeq labels;
  std::string transcript;
  double acoustic = 0.0;   // ln P of all retained paths
  double lm_log10 = 0.0;   // summed word log10 probabilities
  int valid_words = 0;
  int words = 0;
  double total = 0.0;
};

/// Per-frame argmax (lowest index wins ties), then collapse.
template <typename Derived>
DecodeResult greedy_decode(const Eigen::MatrixBase<Derived>& log_probs, const Alphabet& alphabet) {
  std::vector<int> path;
  double acoustic = 0.0;
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    int best = 0;
    for (Eigen::Index c = 1; c < log_probs.cols(); ++c) {
      if (log_probs(t, c) > log_probs(t, best)) best = static_cast<int>(c);
    }
    acoustic += static_cast<double>(log_probs(t, best));
    path.push_back(best);
  }
  DecodeResult r;
  r.labels = collapse(path, alphabet.blank());
  r.transcript = alphabet.decode(r.labels);
  r.acoustic = acoustic;
  r.total = acoustic;
  return r;
}

namespace detail {

// Incremental word-level LM state for one hypothesis.
struct WordState {
  std::vector<std::string> history{kSentenceStart};
  std::string pending;
  double lm_log10 = 0.0;
  int valid_words = 0;
  int words = 0;

  void complete_word(const NGramModel* lm) {
    if (pending.empty()) return;
    ++words;
    if (lm != nullptr) {
      lm_log10 += lm->log_prob(pending, history);
      if (lm->in_vocabulary(pending)) ++valid_words;
      history.push_back(pending);
      const auto keep = static_cast<std::size_t>(std::max(1, lm->order() - 1));
      if (history.size() > keep) history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(keep));
    }
    pending.clear();
  }

  void push(int label, const Alphabet& alphabet, const NGramModel* lm) {
    if (label == alphabet.space()) {
      complete_word(lm);
    } else {
      pending += alphabet.labels()[static_cast<std::size_t>(label)];
    }
  }

  double bonus(const DecoderConfig& cfg) const {
    return cfg.w_lm * std::numbers::ln10 * lm_log10 + cfg.w_valid_word * valid_words;
  }
};

struct PrefixBeam {
  double p_blank = kNegInf;
  double p_nonblank = kNegInf;
  WordState words;

  double acoustic() const { return log_add(p_blank, p_nonblank); }
};

inline DecodeResult finish(const LabelSeq& prefix, double acoustic, WordState ws, const Alphabet& alphabet,
                           const DecoderConfig& cfg) {
  ws.complete_word(cfg.lm);
  DecodeResult r;
  r.labels = prefix;
  r.transcript = alphabet.decode(prefix);
  r.acoustic = acoustic;
  r.lm_log10 = ws.lm_log10;
  r.valid_words = ws.valid_words;
  r.words = ws.words;
  r.total = acoustic + ws.bonus(cfg);
  return r;
}

// Higher score first; equal scores fall back to lexicographic prefix order.
inline bool better(double sa, const LabelSeq& a, double sb, const LabelSeq& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

}  // namespace detail

/// CTC prefix beam search with word-level LM fusion. Paths are merged by
/// collapsed prefix, tracking blank- and non-blank-ending mass separately.
template <typename Derived>
DecodeResult beam_search_decode(const Eigen::MatrixBase<Derived>& log_probs, const Alphabet& alphabet,
                                const DecoderConfig& cfg) {
  using detail::log_add;
  cfg.validate();
  const int C = static_cast<int>(log_probs.cols());
  const int blank = alphabet.blank();
  if (C != alphabet.num_classes()) throw Error("log-prob width does not match alphabet");

  std::map<LabelSeq, detail::PrefixBeam> beams;
  beams[{}].p_blank = 0.0;
  for (Eigen::Index t = 0; t < log_probs.rows(); ++t) {
    std::map<LabelSeq, detail::PrefixBeam> next;
    for (const auto& [prefix, beam] : beams) {
      const double total = beam.acoustic();
      {
        auto& stay = next.try_emplace(prefix, detail::PrefixBeam{detail::kNegInf, detail::kNegInf, beam.words})
                         .first->second;
        stay.p_blank = log_add(stay.p_blank, total + static_cast<double>(log_probs(t, blank)));
        if (!prefix.empty()) {
          stay.p_nonblank =
              log_add(stay.p_nonblank, beam.p_nonblank + static_cast<double>(log_probs(t, prefix.back())));
        }
      }
      for (int c = 0; c < C; ++c) {
        if (c == blank) continue;
        LabelSeq extended = prefix;
        extended.push_back(c);
        auto it = next.find(extended);
        if (it == next.end()) {
          detail::WordState ws = beam.words;
          ws.push(c, alphabet, cfg.lm);
          it = next.emplace(std::move(extended), detail::PrefixBeam{detail::kNegInf, detail::kNegInf, std::move(ws)})
                   .first;
        }
        const double from = (!prefix.empty() && prefix.back() == c) ? beam.p_blank : total;
        it->second.p_nonblank = log_add(it->second.p_nonblank, from + static_cast<double>(log_probs(t, c)));
      }
    }
    // After the last frame every survivor is finished and ranked below.
    if (t + 1 < log_probs.rows() && static_cast<int>(next.size()) > cfg.beam_width) {
      std::vector<std::pair<double, const LabelSeq*>> ranked;
      ranked.reserve(next.size());
      for (const auto& [prefix, beam] : next) ranked.emplace_back(beam.acoustic() + beam.words.bonus(cfg), &prefix);
      std::partial_sort(ranked.begin(), ranked.begin() + cfg.beam_width, ranked.end(),
                        [](const auto& a, const auto& b) { return detail::better(a.first, *a.second, b.first, *b.second); });
      std::map<LabelSeq, detail::PrefixBeam> kept;
      for (int i = 0; i < cfg.beam_width; ++i) {
        auto node = next.extract(*ranked[static_cast<std::size_t>(i)].second);
        kept.insert(std::move(node));
      }
      next = std::move(kept);
    }
    beams = std::move(next);
  }

  DecodeResult best;
  bool have = false;
  for (const auto& [prefix, beam] : beams) {
    auto r = detail::finish(prefix, beam.acoustic(), beam.words, alphabet, cfg);
    if (!have || detail::better(r.total, r.labels, best.total, best.labels)) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

/// Scores a complete label sequence under the decoder's word terms, given
/// its acoustic log probability.
inline DecodeResult score_transcript(const LabelSeq& labels, double acoustic, const Alphabet& alphabet,
                                     const DecoderConfig& cfg) {
  detail::WordState ws;
  for (int l : labels) ws.push(l, alphabet, cfg.lm);
  return detail::finish(labels, acoustic, std::move(ws), alphabet, cfg);
}

/// Enumerates all C^T frame paths, sums path probabilities per collapsed
/// transcript, applies the same word scoring, and returns the best.
template <typename Derived>
DecodeResult exhaustive_oracle(const Eigen::MatrixBase<Derived>& log_probs, const Alphabet& alphabet,
                               const DecoderConfig& cfg) {
  const int T = static_cast<int>(log_probs.rows());
  const int C = static_cast<int>(log_probs.cols());
  const double paths = std::pow(static_cast<double>(C), T);
  if (paths > 1e6) throw Error("exhaustive decoding guard exceeded: C^T = " + std::to_string(paths));
  std::map<LabelSeq, double> mass;
  std::vector<int> path(static_cast<std::size_t>(T));
  for (std::int64_t n = 0; n < static_cast<std::int64_t>(paths); ++n) {
    std::int64_t rem = n;
    double lp = 0.0;
    for (int t = 0; t < T; ++t) {
      path[static_cast<std::size_t>(t)] = static_cast<int>(rem % C);
      rem /= C;
      lp += static_cast<double>(log_probs(t, path[static_cast<std::size_t>(t)]));
    }
    auto [it, inserted] = mass.try_emplace(collapse(path, alphabet.blank()), lp);
    if (!inserted) it->second = detail::log_add(it->second, lp);
  }
  DecodeResult best;
  bool have = false;
  for (const auto& [labels, lp] : mass) {
    auto r = score_transcript(labels, lp, alphabet, cfg);
    if (!have || detail::better(r.total, r.labels, best.total, best.labels)) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace w2l
