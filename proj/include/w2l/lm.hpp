// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "w2l/common.hpp"
#include "w2l/utf8.hpp"

namespace w2l {

inline constexpr const char* kSentenceStart = "<s>";
inline constexpr const char* kSentenceEnd = "</s>";
inline constexpr const char* kUnknownWord = "<unk>";

/// log10 value standing in for probability zero (ARPA convention).
inline constexpr double kLogZero = -99.0;

/// Backoff word n-gram model with log10 probabilities and backoff weights.
class NGramModel {
public:
  struct Entry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;
  };
  using Key = std::vector<int>;

  NGramModel() = default;
  explicit NGramModel(int order) : tables_(static_cast<std::size_t>(order)) {
    if (order < 1) throw Error("n-gram order must be >= 1");
  }

  int order() const { return static_cast<int>(tables_.size()); }

  /// log10 returned for out-of-vocabulary words when no <unk> entry exists.
  double oov_floor() const { return oov_floor_; }
  void set_oov_floor(double v) { oov_floor_ = v; }

  int word_id(const std::string& w) const {
    auto it = ids_.find(w);
    return it == ids_.end() ? -1 : it->second;
  }
  int intern(const std::string& w) {
    auto [it, inserted] = ids_.emplace(w, static_cast<int>(words_.size()));
    if (inserted) words_.push_back(w);
    return it->second;
  }
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }

  /// True for words with a unigram entry, excluding <s>, </s> and <unk>.
  bool in_vocabulary(const std::string& w) const {
    if (w == kSentenceStart || w == kSentenceEnd || w == kUnknownWord) return false;
    const int id = word_id(w);
    return id >= 0 && tables_.front().count(Key{id}) != 0;
  }

  void set(const std::vector<std::string>& ngram, Entry e) {
    if (ngram.empty() || static_cast<int>(ngram.size()) > order()) throw Error("n-gram length out of range");
    Key key;
    for (const auto& w : ngram) key.push_back(intern(w));
    tables_[ngram.size() - 1][key] = e;
  }

  const Entry* find(const Key& key) const {
    if (key.empty() || static_cast<int>(key.size()) > order()) return nullptr;
    const auto& t = tables_[key.size() - 1];
    auto it = t.find(key);
    return it == t.end() ? nullptr : &it->second;
  }

  const std::map<Key, Entry>& table(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)); }
  std::size_t count(int n) const { return table(n).size(); }

  /// log10 P(word | history) with Katz-style backoff. Only the last
  /// order-1 history words are used.
  double log_prob(const std::string& w, std::span<const std::string> history) const {
    int id = word_id(w);
    if (id < 0 || tables_.front().count(Key{id}) == 0) {
      id = word_id(kUnknownWord);
      if (id < 0 || tables_.front().count(Key{id}) == 0) return oov_floor_;
    }
    const std::size_t keep = std::min(history.size(), static_cast<std::size_t>(order() - 1));
    Key ctx;
    const int unk = word_id(kUnknownWord);
    for (std::size_t i = history.size() - keep; i < history.size(); ++i) {
      const int h = word_id(history[i]);
      ctx.push_back(h >= 0 ? h : unk);
    }
    double acc = 0.0;
    for (std::size_t drop = 0; drop <= ctx.size(); ++drop) {
      Key key(ctx.begin() + static_cast<std::ptrdiff_t>(drop), ctx.end());
      const bool usable = std::find(key.begin(), key.end(), -1) == key.end();
      if (usable) {
        key.push_back(id);
        if (const Entry* e = find(key)) return acc + e->log10_prob;
        key.pop_back();
        if (const Entry* ctx_entry = find(key)) acc += ctx_entry->log10_backoff;
      }
    }
    return acc + oov_floor_;  // unreachable for words with a unigram entry
  }

  /// Sum of log10 P over words and the closing </s>, starting from <s>.
  /// Models without a </s> unigram score the words only.
  double score_sentence(const std::vector<std::string>& words) const {
    std::vector<std::string> history{kSentenceStart};
    double total = 0.0;
    for (const auto& w : words) {
      total += log_prob(w, history);
      history.push_back(w);
    }
    const int eos = word_id(kSentenceEnd);
    if (eos < 0 || tables_.front().count(Key{eos}) == 0) return total;
    return total + log_prob(kSentenceEnd, history);
  }

private:
  std::vector<std::map<Key, Entry>> tables_;
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> ids_;
  double oov_floor_ = -10.0;
};

inline double log_prob_backoff(const NGramModel& m, const std::string& word, const std::vector<std::string>& history) {
  return m.log_prob(word, history);
}

inline double score_sentence(const NGramModel& m, const std::vector<std::string>& words) {
  return m.score_sentence(words);
}

/// Parses the ARPA text format.
inline NGramModel parse_arpa(std::istream& in, const std::string& source = "<arpa>") {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> Error {
    return Error(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line) == "\\data\\") break;
  }
  if (!in) throw fail("missing \\data\\ header");

  std::vector<std::size_t> declared;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) {
      if (!declared.empty()) break;
      continue;
    }
    if (t.rfind("ngram ", 0) != 0) throw fail("expected 'ngram N=count', got '" + t + "'");
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw fail("malformed ngram count line");
    int n = 0;
    long long c = 0;
    try {
      n = std::stoi(t.substr(6, eq - 6));
      c = std::stoll(t.substr(eq + 1));
    } catch (const std::exception&) {
      throw fail("malformed ngram count line");
    }
    if (n != static_cast<int>(declared.size()) + 1 || c < 0) throw fail("ngram counts must be listed in order 1..N");
    declared.push_back(static_cast<std::size_t>(c));
  }
  if (declared.empty()) throw fail("no ngram counts declared");

  NGramModel model(static_cast<int>(declared.size()));
  int current = 0;
  std::vector<std::size_t> seen(declared.size(), 0);
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t == "\\end\\") {
      ended = true;
      break;
    }
    if (t.front() == '\\') {
      int n = 0;
      if (std::sscanf(t.c_str(), "\\%d-grams:", &n) != 1) throw fail("unknown section '" + t + "'");
      if (n != current + 1 || n > model.order()) throw fail("unexpected section '" + t + "'");
      if (current > 0 && seen[static_cast<std::size_t>(current - 1)] != declared[static_cast<std::size_t>(current - 1)]) {
        throw fail(std::to_string(current) + "-gram count mismatch: declared " +
                   std::to_string(declared[static_cast<std::size_t>(current - 1)]) + ", found " +
                   std::to_string(seen[static_cast<std::size_t>(current - 1)]));
      }
      current = n;
      continue;
    }
    if (current == 0) throw fail("n-gram entry outside a section");
    std::istringstream fields(t);
    std::vector<std::string> tok;
    for (std::string f; fields >> f;) tok.push_back(f);
    const auto n = static_cast<std::size_t>(current);
    if (tok.size() != n + 1 && tok.size() != n + 2) throw fail("expected " + std::to_string(n) + " words");
    NGramModel::Entry e;
    try {
      e.log10_prob = std::stod(tok[0]);
      if (tok.size() == n + 2) e.log10_backoff = std::stod(tok[n + 1]);
    } catch (const std::exception&) {
      throw fail("malformed number");
    }
    if (e.log10_prob > 0.0) throw fail("log10 probability must be <= 0");
    std::vector<std::string> words(tok.begin() + 1, tok.begin() + 1 + static_cast<std::ptrdiff_t>(n));
    if (n > 1) {
      NGramModel::Key ctx;
      for (std::size_t i = 0; i + 1 < n; ++i) ctx.push_back(model.word_id(words[i]));
      if (model.find(ctx) == nullptr) throw fail("context of n-gram is not a listed (n-1)-gram");
    }
    model.set(words, e);
    ++seen[n - 1];
  }
  if (!ended) throw fail("missing \\end\\ marker");
  if (current != model.order()) throw fail("missing n-gram sections");
  for (std::size_t i = 0; i < declared.size(); ++i) {
    if (seen[i] != declared[i] || model.count(static_cast<int>(i + 1)) != declared[i]) {
      throw fail(std::to_string(i + 1) + "-gram count mismatch: declared " + std::to_string(declared[i]) +
                 ", found " + std::to_string(seen[i]));
    }
  }
  return model;
}

inline NGramModel load_arpa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ARPA file '" + path.string() + "'");
  return parse_arpa(in, path.string());
}

/// Writes ARPA text; values use six decimals, zero backoffs are omitted.
inline void write_arpa(std::ostream& out, const NGramModel& m) {
  out << "\\data\\\n";
  for (int n = 1; n <= m.order(); ++n) out << "ngram " << n << '=' << m.count(n) << '\n';
  char buf[64];
  for (int n = 1; n <= m.order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    for (const auto& [key, e] : m.table(n)) {
      std::snprintf(buf, sizeof(buf), "%.6f", e.log10_prob);
      out << buf << '\t';
      for (std::size_t i = 0; i < key.size(); ++i) out << (i ? " " : "") << m.word(key[i]);
      if (n < m.order() && e.log10_backoff != 0.0) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.log10_backoff);
        out << '\t' << buf;
      }
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline void save_arpa(const std::filesystem::path& path, const NGramModel& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write ARPA file '" + path.string() + "'");
  write_arpa(out, m);
}

/// Add-k smoothed n-gram estimation with normalized backoff. Each sentence is
/// wrapped in <s> ... </s>. Seen n-grams get (c(h,w)+k)/(c(h)+k|V|); the
/// remaining mass of each history is spread over unseen words through the
/// lower order, so every conditional distribution sums to one. |V| counts
/// word types plus </s>.
inline NGramModel train_ngram(const std::vector<std::vector<std::string>>& corpus, int order, double k = 0.01) {
  if (order < 1) throw Error("n-gram order must be >= 1");
  if (k < 0) throw Error("smoothing constant must be non-negative");
  if (corpus.empty()) throw Error("cannot train an n-gram model on an empty corpus");

  NGramModel model(order);
  const int bos = model.intern(kSentenceStart);
  const int eos = model.intern(kSentenceEnd);
  std::vector<std::vector<int>> sents;
  for (const auto& s : corpus) {
    std::vector<int> ids{bos};
    for (const auto& w : s) {
      if (w == kSentenceStart || w == kSentenceEnd) throw Error("corpus contains reserved token " + w);
      ids.push_back(model.intern(w));
    }
    ids.push_back(eos);
    sents.push_back(std::move(ids));
  }

  // counts[n-1][ngram]
  std::vector<std::map<NGramModel::Key, double>> counts(static_cast<std::size_t>(order));
  for (const auto& s : sents) {
    for (int n = 1; n <= order; ++n) {
      for (std::size_t i = 1; i < s.size(); ++i) {  // position of the predicted word
        if (static_cast<int>(i) + 1 < n) continue;
        NGramModel::Key key(s.begin() + static_cast<std::ptrdiff_t>(i + 1 - static_cast<std::size_t>(n)),
                            s.begin() + static_cast<std::ptrdiff_t>(i + 1));
        counts[static_cast<std::size_t>(n - 1)][key] += 1.0;
      }
    }
  }

  std::vector<int> vocab;
  for (const auto& [key, c] : counts[0]) vocab.push_back(key[0]);
  const double V = static_cast<double>(vocab.size());

  double total = 0.0;
  for (const auto& [key, c] : counts[0]) total += c;
  for (int w : vocab) {
    const double c = counts[0][NGramModel::Key{w}];
    model.set({model.word(w)}, {std::log10((c + k) / (total + k * V)), 0.0});
  }
  model.set({kSentenceStart}, {kLogZero, 0.0});

  for (int n = 2; n <= order; ++n) {
    std::map<NGramModel::Key, double> hist_total;
    std::map<NGramModel::Key, std::vector<int>> followers;
    for (const auto& [key, c] : counts[static_cast<std::size_t>(n - 1)]) {
      NGramModel::Key h(key.begin(), key.end() - 1);
      hist_total[h] += c;
      followers[h].push_back(key.back());
    }
    for (const auto& [h, ch] : hist_total) {
      double seen_mass = 0.0, lower_mass = 0.0;
      std::vector<std::string> lower_hist;
      for (std::size_t i = 1; i < h.size(); ++i) lower_hist.push_back(model.word(h[i]));
      for (int w : followers[h]) {
        NGramModel::Key key = h;
        key.push_back(w);
        const double p = (counts[static_cast<std::size_t>(n - 1)][key] + k) / (ch + k * V);
        seen_mass += p;
        lower_mass += std::pow(10.0, model.log_prob(model.word(w), lower_hist));
        std::vector<std::string> words;
        for (int id : key) words.push_back(model.word(id));
        model.set(words, {std::log10(p), 0.0});
      }
      const double left = 1.0 - seen_mass;
      const double denom = 1.0 - lower_mass;
      double bo = kLogZero;
      if (left > 1e-12 && denom > 1e-12) bo = std::log10(left / denom);
      std::vector<std::string> hw;
      for (int id : h) hw.push_back(model.word(id));
      const auto* e = model.find(h);
      if (e == nullptr) throw Error("internal: history missing from lower order");
      model.set(hw, {e->log10_prob, bo});
    }
  }
  return model;
}

/// Splits each line of text into words.
inline std::vector<std::vector<std::string>> tokenize_corpus(std::istream& in) {
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    auto words = utf8::split_words(line);
    if (!words.empty()) out.push_back(std::move(words));
  }
  return out;
}

}  // namespace w2l
