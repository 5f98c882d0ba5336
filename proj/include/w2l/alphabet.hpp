// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/utf8.hpp"

namespace w2l {

/// Ordered grapheme inventory. The CTC blank is not a label; it always
/// occupies the class index right after the last label.
class Alphabet {
public:
  Alphabet() = default;

  explicit Alphabet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i].empty()) throw Error("alphabet label must not be empty");
      if (!index_.emplace(labels_[i], static_cast<int>(i)).second) {
        throw Error("duplicate alphabet label '" + labels_[i] + "'");
      }
    }
  }

  /// a-z, space, apostrophe.
  static Alphabet english() {
    std::vector<std::string> labels;
    for (char c = 'a'; c <= 'z'; ++c) labels.emplace_back(1, c);
    labels.emplace_back(" ");
    labels.emplace_back("'");
    return Alphabet(std::move(labels));
  }

  static std::vector<std::string> german_extra() { return {"ä", "ö", "ü", "ß"}; }

  static Alphabet german() {
    auto labels = english().labels();
    for (auto& g : german_extra()) labels.push_back(g);
    return Alphabet(std::move(labels));
  }

  const std::vector<std::string>& labels() const { return labels_; }
  int size() const { return static_cast<int>(labels_.size()); }
  int num_classes() const { return size() + 1; }
  int blank() const { return size(); }

  bool contains(std::string_view label) const { return index_.count(std::string(label)) != 0; }

  int index_of(std::string_view label) const {
    auto it = index_.find(std::string(label));
    if (it == index_.end()) throw Error("label '" + std::string(label) + "' not in alphabet");
    return it->second;
  }

  /// Label index of the word delimiter, or -1.
  int space() const {
    auto it = index_.find(" ");
    return it == index_.end() ? -1 : it->second;
  }

  LabelSeq encode(std::string_view text) const {
    LabelSeq out;
    for (const auto& cp : utf8::split_code_points(text)) out.push_back(index_of(cp));
    return out;
  }

  std::string decode(const LabelSeq& seq) const {
    std::string out;
    for (int i : seq) {
      if (i < 0 || i >= size()) throw Error("label index out of range: " + std::to_string(i));
      out += labels_[static_cast<std::size_t>(i)];
    }
    return out;
  }

  /// True when every code point of text is a label.
  bool covers(std::string_view text) const {
    try {
      for (const auto& cp : utf8::split_code_points(text)) {
        if (!contains(cp)) return false;
      }
    } catch (const Error&) {
      return false;
    }
    return true;
  }

  bool operator==(const Alphabet& o) const { return labels_ == o.labels_; }

private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace w2l
