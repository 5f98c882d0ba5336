// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "w2l/lm.hpp"

namespace w2l {
namespace {

NGramModel arpa(const std::string& text) {
  std::istringstream in(text);
  return parse_arpa(in);
}

const char* kToy = R"(
some preamble text
\data\
ngram 1=5
ngram 2=3
ngram 3=1

\1-grams:
-1.0	<s>	-0.5
-0.7	</s>
-1.0	a	-0.2
-0.6	b	-0.3
-1.3	c

\2-grams:
-0.4	<s> a	-0.1
-0.25	a b	-0.15
-0.9	b c

\3-grams:
-0.05	<s> a b

\end\
)";

TEST(Arpa, SingleUnigram) {
  const auto m = arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.30103\ta\n\n\\end\\\n");
  EXPECT_EQ(m.order(), 1);
  EXPECT_DOUBLE_EQ(m.log_prob("a", std::vector<std::string>{}), -0.30103);
  // No </s> entry, so the sentence score is the word alone.
  EXPECT_DOUBLE_EQ(m.score_sentence({"a"}), -0.30103);
}

TEST(Arpa, HandBackoffChains) {
  const auto m = arpa(kToy);
  using H = std::vector<std::string>;
  EXPECT_NEAR(log_prob_backoff(m, "b", H{"<s>", "a"}), -0.05, 1e-12);     // stored trigram
  EXPECT_NEAR(log_prob_backoff(m, "b", H{"a"}), -0.25, 1e-12);            // stored bigram
  EXPECT_NEAR(log_prob_backoff(m, "c", H{"a"}), -0.2 + -1.3, 1e-12);      // unseen bigram: bo(a) + p(c)
  EXPECT_NEAR(log_prob_backoff(m, "c", H{"<s>", "a"}), -0.1 + -0.2 + -1.3, 1e-12);
  EXPECT_NEAR(log_prob_backoff(m, "c", H{"a", "b"}), -0.15 + -0.9, 1e-12);  // no trigram context "a b c"
  EXPECT_NEAR(log_prob_backoff(m, "zzz", H{"a"}), -10.0, 1e-12);
  EXPECT_NEAR(log_prob_backoff(m, "a", H{"zzz"}), -1.0, 1e-12);            // unknown history word
}

TEST(Arpa, UnseenBigramChain) {
  const auto m = arpa(
      "\\data\\\nngram 1=3\nngram 2=1\n\n\\1-grams:\n-1.0\tx\t-0.2\n-1.0\ty\n-0.5\tz\n\n\\2-grams:\n-0.3\tx z\n\n\\end\\\n");
  EXPECT_NEAR(m.log_prob("y", std::vector<std::string>{"x"}), -1.2, 1e-12);
}

TEST(Arpa, UnkUsedWhenPresent) {
  const auto m = arpa("\\data\\\nngram 1=2\n\n\\1-grams:\n-2.5\t<unk>\n-0.1\ta\n\n\\end\\\n");
  EXPECT_DOUBLE_EQ(m.log_prob("q", std::vector<std::string>{}), -2.5);
  EXPECT_FALSE(m.in_vocabulary("q"));
  EXPECT_FALSE(m.in_vocabulary("<unk>"));
  EXPECT_TRUE(m.in_vocabulary("a"));
}

TEST(Arpa, SentenceScores) {
  const auto m = arpa(kToy);
  // empty sentence: log P(</s> | <s>) = bo(<s>) + p(</s>)
  EXPECT_NEAR(score_sentence(m, {}), -0.5 + -0.7, 1e-12);
  // "a b": p(a|<s>) + p(b|<s> a) + p(</s>|a b) = -0.4 + -0.05 + (bo(a b) + bo(b) + p(</s>))
  EXPECT_NEAR(score_sentence(m, {"a", "b"}), -0.4 + -0.05 + (-0.15 + -0.3 + -0.7), 1e-12);
}

TEST(Arpa, CountMismatchAndMalformed) {
  try {
    arpa("\\data\\\nngram 1=2\n\n\\1-grams:\n-0.3\ta\n\n\\end\\\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("count mismatch"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find(":7:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(arpa("nothing here\n"), Error);
  EXPECT_THROW(arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta\n"), Error);                   // no \end\.
  EXPECT_THROW(arpa("\\data\\\nngram 1=1\n\n\\1-grams:\nfoo\ta\n\n\\end\\\n"), Error);         // bad number
  EXPECT_THROW(arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n0.5\ta\n\n\\end\\\n"), Error);         // positive log10
  EXPECT_THROW(arpa("\\data\\\nngram 1=1\nngram 2=1\n\n\\1-grams:\n-0.3\ta\n\n\\2-grams:\n-0.1\tb a\n\n\\end\\\n"),
               Error);  // missing context
}

TEST(Arpa, RoundTripPreservesValues) {
  const auto m = arpa(kToy);
  std::ostringstream out;
  write_arpa(out, m);
  const auto back = arpa(out.str());
  ASSERT_EQ(back.order(), m.order());
  for (int n = 1; n <= m.order(); ++n) {
    ASSERT_EQ(back.count(n), m.count(n));
    for (const auto& [key, e] : m.table(n)) {
      NGramModel::Key k2;
      for (int id : key) k2.push_back(back.word_id(m.word(id)));
      const auto* e2 = back.find(k2);
      ASSERT_NE(e2, nullptr);
      EXPECT_NEAR(e2->log10_prob, e.log10_prob, 1e-6);
      EXPECT_NEAR(e2->log10_backoff, e.log10_backoff, 1e-6);
    }
  }
}

// Independent counting oracle for unigram maximum likelihood with </s>.
std::map<std::string, double> unigram_oracle(const std::vector<std::vector<std::string>>& corpus) {
  std::map<std::string, double> c;
  double total = 0;
  for (const auto& s : corpus) {
    for (const auto& w : s) {
      c[w] += 1;
      total += 1;
    }
    c["</s>"] += 1;
    total += 1;
  }
  for (auto& [w, v] : c) v /= total;
  return c;
}

TEST(Train, UnigramMatchesCountOracle) {
  const std::vector<std::vector<std::string>> corpus = {{"a"}, {"a"}, {"b"}};
  const auto m = train_ngram(corpus, 1, 0.0);
  const auto oracle = unigram_oracle(corpus);
  EXPECT_NEAR(oracle.at("a"), 1.0 / 3.0, 1e-15);  // a:2 b:1 </s>:3 over 6 tokens
  for (const auto& [w, p] : oracle) {
    EXPECT_NEAR(m.log_prob(w, std::vector<std::string>{}), std::log10(p), 1e-12) << w;
  }
}

TEST(Train, BigramDeterministic) {
  const auto m = train_ngram({{"a", "b"}, {"a", "b"}}, 2, 0.0);
  EXPECT_NEAR(m.log_prob("b", std::vector<std::string>{"a"}), 0.0, 1e-12);
  EXPECT_NEAR(m.log_prob("a", std::vector<std::string>{"<s>"}), 0.0, 1e-12);
  EXPECT_NEAR(m.log_prob("</s>", std::vector<std::string>{"b"}), 0.0, 1e-12);
}

std::vector<std::vector<std::string>> random_corpus(std::mt19937_64& rng, int sentences, int vocab) {
  std::uniform_int_distribution<int> len(0, 6), word(0, vocab - 1);
  std::vector<std::vector<std::string>> c;
  for (int i = 0; i < sentences; ++i) {
    std::vector<std::string> s;
    const int n = len(rng);
    for (int j = 0; j < n; ++j) s.push_back("w" + std::to_string(word(rng)));
    c.push_back(s);
  }
  return c;
}

TEST(Train, DistributionsNormalizedForObservedHistories) {
  std::mt19937_64 rng(11);
  for (double k : {0.0, 0.01, 0.5}) {
    const auto corpus = random_corpus(rng, 40, 7);
    const auto m = train_ngram(corpus, 3, k);
    std::vector<std::string> vocab;
    for (const auto& [key, e] : m.table(1)) {
      if (m.word(key[0]) != "<s>") vocab.push_back(m.word(key[0]));
    }
    std::set<std::vector<std::string>> histories = {{}};
    for (const auto& s : corpus) {
      std::vector<std::string> full = {"<s>"};
      full.insert(full.end(), s.begin(), s.end());
      for (std::size_t i = 0; i < full.size(); ++i) {
        histories.insert({full[i]});
        if (i + 1 < full.size()) histories.insert({full[i], full[i + 1]});
      }
    }
    for (const auto& h : histories) {
      double sum = 0;
      for (const auto& w : vocab) sum += std::pow(10.0, m.log_prob(w, h));
      EXPECT_NEAR(sum, 1.0, 1e-9) << "k=" << k << " history size " << h.size();
    }
  }
}

TEST(Train, SeenNgramsNeverBackOff) {
  std::mt19937_64 rng(12);
  const auto corpus = random_corpus(rng, 30, 5);
  const auto m = train_ngram(corpus, 3, 0.0);
  for (const auto& s : corpus) {
    std::vector<std::string> full = {"<s>"};
    full.insert(full.end(), s.begin(), s.end());
    full.push_back("</s>");
    for (std::size_t i = 2; i < full.size(); ++i) {
      NGramModel::Key key = {m.word_id(full[i - 2]), m.word_id(full[i - 1]), m.word_id(full[i])};
      const auto* e = m.find(key);
      ASSERT_NE(e, nullptr);
      EXPECT_DOUBLE_EQ(m.log_prob(full[i], std::vector<std::string>{full[i - 2], full[i - 1]}), e->log10_prob);
    }
  }
}

TEST(Train, EmptyCorpusAndReservedTokens) {
  EXPECT_THROW(train_ngram({}, 2), Error);
  EXPECT_THROW(train_ngram({{"a", "</s>"}}, 2), Error);
  EXPECT_THROW(train_ngram({{"a"}}, 0), Error);
}

TEST(Train, TrainedModelRoundTripsThroughArpa) {
  std::mt19937_64 rng(13);
  const auto m = train_ngram(random_corpus(rng, 50, 6), 4);
  std::ostringstream out;
  write_arpa(out, m);
  const auto back = arpa(out.str());
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_corpus(rng, 1, 8)[0];
    EXPECT_NEAR(back.score_sentence(s), m.score_sentence(s), 1e-5 * static_cast<double>(s.size() + 1));
  }
}

// Straight-line scorer written from the backoff definition.
double reference_log_prob(const NGramModel& m, const std::string& w, std::vector<std::string> h) {
  auto id = [&](const std::string& s) { return m.word_id(s); };
  if (!m.in_vocabulary(w) && w != "</s>") return m.oov_floor();
  while (static_cast<int>(h.size()) > m.order() - 1) h.erase(h.begin());
  double bo = 0.0;
  while (true) {
    NGramModel::Key key;
    bool known = true;
    for (const auto& x : h) {
      known = known && id(x) >= 0;
      key.push_back(id(x));
    }
    if (known) {
      key.push_back(id(w));
      if (const auto* e = m.find(key)) return bo + e->log10_prob;
      key.pop_back();
      if (const auto* c = m.find(key)) bo += c->log10_backoff;
    }
    h.erase(h.begin());
  }
}

TEST(Score, MatchesStraightLineScorer) {
  std::mt19937_64 rng(14);
  const auto m = train_ngram(random_corpus(rng, 60, 6), 3, 0.05);
  for (int trial = 0; trial < 150; ++trial) {
    const auto s = random_corpus(rng, 1, 9)[0];  // w6..w8 are out of vocabulary
    std::vector<std::string> h = {"<s>"};
    double ref = 0;
    for (const auto& w : s) {
      ref += reference_log_prob(m, w, h);
      h.push_back(w);
    }
    ref += reference_log_prob(m, "</s>", h);
    EXPECT_NEAR(score_sentence(m, s), ref, 1e-9);
  }
}

TEST(Score, AppendingWordNeverIncreasesPrefixScore) {
  std::mt19937_64 rng(15);
  const auto m = train_ngram(random_corpus(rng, 60, 6), 3, 0.05);
  for (int trial = 0; trial < 100; ++trial) {
    auto s = random_corpus(rng, 1, 7)[0];
    std::vector<std::string> h = {"<s>"};
    double prev = 0;
    for (const auto& w : s) {
      const double next = prev + m.log_prob(w, h);
      EXPECT_LE(next, prev);
      prev = next;
      h.push_back(w);
    }
  }
}

TEST(Corpus, Tokenize) {
  std::istringstream in("hello  world\n\n  one\n");
  const auto c = tokenize_corpus(in);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0], (std::vector<std::string>{"hello", "world"}));
}

TEST(Arpa, FileRoundTrip) {
  testing::TempDir dir("arpa");
  const auto m = arpa(kToy);
  save_arpa(dir / "m.arpa", m);
  const auto back = load_arpa(dir / "m.arpa");
  EXPECT_NEAR(back.score_sentence({"a", "b", "c"}), m.score_sentence({"a", "b", "c"}), 1e-6);
  EXPECT_THROW(load_arpa(dir / "missing.arpa"), Error);
}

}  // namespace
}  // namespace w2l
