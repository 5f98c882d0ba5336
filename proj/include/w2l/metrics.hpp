// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/utf8.hpp"

namespace w2l {

/// Levenshtein distance with unit costs.
template <typename T>
int edit_distance(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline int char_edit_distance(std::string_view ref, std::string_view hyp) {
  return edit_distance(utf8::split_code_points(ref), utf8::split_code_points(hyp));
}

inline int word_edit_distance(std::string_view ref, std::string_view hyp) {
  return edit_distance(utf8::split_words(ref), utf8::split_words(hyp));
}

/// Character error rate: code-point edit distance over reference length.
inline double ler(std::string_view ref, std::string_view hyp) {
  const auto r = utf8::split_code_points(ref);
  if (r.empty()) throw Error("LER undefined for an empty reference");
  return static_cast<double>(edit_distance(r, utf8::split_code_points(hyp))) / static_cast<double>(r.size());
}

/// Word error rate over whitespace tokens. May exceed 1.
inline double wer(std::string_view ref, std::string_view hyp) {
  const auto r = utf8::split_words(ref);
  if (r.empty()) throw Error("WER undefined for an empty reference");
  return static_cast<double>(edit_distance(r, utf8::split_words(hyp))) / static_cast<double>(r.size());
}

/// Accumulates per-utterance rates. The mean of rates is the headline number;
/// pooled rates (total edits / total reference length) are kept alongside.
struct ErrorRateSummary {
  double ler_sum = 0.0, wer_sum = 0.0;
  long char_edits = 0, char_ref = 0, word_edits = 0, word_ref = 0;
  int count = 0;

  void add(std::string_view ref, std::string_view hyp) {
    const auto rc = utf8::split_code_points(ref);
    const auto rw = utf8::split_words(ref);
    if (rc.empty() || rw.empty()) throw Error("error rates undefined for an empty reference");
    const int ce = edit_distance(rc, utf8::split_code_points(hyp));
    const int we = edit_distance(rw, utf8::split_words(hyp));
    ler_sum += static_cast<double>(ce) / static_cast<double>(rc.size());
    wer_sum += static_cast<double>(we) / static_cast<double>(rw.size());
    char_edits += ce;
    char_ref += static_cast<long>(rc.size());
    word_edits += we;
    word_ref += static_cast<long>(rw.size());
    ++count;
  }

  double mean_ler() const { return count ? ler_sum / count : 0.0; }
  double mean_wer() const { return count ? wer_sum / count : 0.0; }
  double pooled_ler() const { return char_ref ? static_cast<double>(char_edits) / static_cast<double>(char_ref) : 0.0; }
  double pooled_wer() const { return word_ref ? static_cast<double>(word_edits) / static_cast<double>(word_ref) : 0.0; }
};

}  // namespace w2l
