// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion numbers as arguments to
// run a subset, e.g. `acceptance 1 8 10`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "w2l/checkpoint.hpp"
#include "w2l/ctc.hpp"
#include "w2l/decode.hpp"
#include "w2l/evaluate.hpp"
#include "w2l/experiment.hpp"
#include "w2l/frontend.hpp"
#include "w2l/lm.hpp"
#include "w2l/metrics.hpp"
#include "w2l/net.hpp"
#include "w2l/train.hpp"

namespace {

using namespace w2l;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Collects sub-checks; the first failure message is kept.
class Checks {
public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failure_.empty()) failure_ = what;
  }
  bool ok() const { return failure_.empty(); }
  Outcome outcome(const std::string& summary) const {
    return {ok(), ok() ? summary : "failed: " + failure_ + " (" + summary + ")"};
  }

private:
  int count_ = 0;
  std::string failure_;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

Mat<double> random_log_probs(std::mt19937_64& rng, int T, int C, double spread) {
  std::normal_distribution<double> d(0.0, spread);
  Mat<double> m(T, C);
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < C; ++c) m(t, c) = d(rng);
    const double mx = m.row(t).maxCoeff();
    const double lse = mx + std::log((m.row(t).array() - mx).exp().sum());
    m.row(t).array() -= lse;
  }
  return m;
}

Mat<double> random_features(std::mt19937_64& rng, int frames, int channels) {
  std::normal_distribution<double> d(0.0, 1.0);
  Mat<double> m(frames, channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

Alphabet letters(int n) {
  std::vector<std::string> l;
  for (int i = 0; i < n; ++i) l.emplace_back(1, static_cast<char>('a' + i));
  return Alphabet(l);
}

// 1. CTC forward-backward against path enumeration.
Outcome ctc_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  Checks c;
  double worst = 0.0;
  int infeasible = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = std::uniform_int_distribution<int>(1, 6)(rng);
    const int C = std::uniform_int_distribution<int>(2, 4)(rng);
    const int blank = C - 1;
    const int len = std::uniform_int_distribution<int>(0, 3)(rng);
    LabelSeq label;
    for (int i = 0; i < len; ++i) label.push_back(std::uniform_int_distribution<int>(0, C - 2)(rng));
    const auto lp = random_log_probs(rng, T, C, 1.5);
    std::optional<double> fast, slow;
    try {
      fast = ctc_loss_grad(lp, label, blank).loss;
    } catch (const InfeasibleAlignment&) {
    }
    try {
      slow = ctc_brute_force(lp, label, blank);
    } catch (const InfeasibleAlignment&) {
    }
    c.expect(fast.has_value() == slow.has_value(), "feasibility disagrees on trial " + std::to_string(trial));
    if (!fast || !slow) {
      ++infeasible;
      continue;
    }
    worst = std::max(worst, std::abs(*fast - *slow));
  }
  const double secs = seconds_since(t0);
  c.expect(worst <= 1e-9, "max |diff| " + fmt(worst));
  c.expect(secs < 30.0, "runtime " + fmt(secs) + " s");
  return c.outcome("1000 instances (" + std::to_string(infeasible) + " infeasible, agreed), max |diff| " + fmt(worst, 3) +
                   ", " + fmt(secs, 3) + " s");
}

// Mean CTC loss of a batch under params, double precision.
double mean_loss(const ModelParams<double>& p, const PaddedBatch<double>& batch, const std::vector<const LabelSeq*>& labels) {
  return batch_ctc_loss(forward(p, batch), labels, p.alphabet.blank()).loss;
}

// 2. End-to-end gradients against central differences.
Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2);
  ModelConfig cfg;
  cfg.n_mels = 4;
  cfg.layers.push_back({3, 2, 4, 6, Activation::Relu});
  cfg.layers.push_back({2, 1, 6, 4, Activation::None});
  auto p = init_xavier<double>(cfg, letters(3), 5);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = u(rng);
  }
  const auto x1 = random_features(rng, 21, 4), x2 = random_features(rng, 16, 4);
  const auto batch = make_batch<double>({&x1, &x2});
  const LabelSeq y1{0, 1, 1}, y2{2};
  const std::vector<const LabelSeq*> labels{&y1, &y2};
  const auto fwd = forward(p, batch, true, 0);
  const auto bl = batch_ctc_loss(fwd, labels, p.alphabet.blank());
  const auto grads = backward(p, fwd, bl.grad, FreezeMask(0, 2));
  const double h = 1e-6;
  double worst = 0.0;
  int checked = 0;
  for (int l = 0; l < 2; ++l) {
    auto& layer = p.layers[static_cast<std::size_t>(l)];
    const auto& g = *grads.layers[static_cast<std::size_t>(l)];
    auto probe = [&](double* param, double analytic) {
      const double keep = *param;
      *param = keep + h;
      const double up = mean_loss(p, batch, labels);
      *param = keep - h;
      const double down = mean_loss(p, batch, labels);
      *param = keep;
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - analytic) / std::max(1e-6, std::max(std::abs(fd), std::abs(analytic)));
      worst = std::max(worst, rel);
      ++checked;
    };
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index k = 0; k < layer.weight.cols(); ++k) probe(&layer.weight(r, k), (*g.weight)(r, k));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) probe(&layer.bias(r), (*g.bias)(r, 0));
  }
  const double secs = seconds_since(t0);
  Checks c;
  c.expect(worst <= 1e-4, "max relative error " + fmt(worst));
  c.expect(secs < 60.0, "runtime " + fmt(secs) + " s");
  return c.outcome(std::to_string(checked) + " parameters, max relative error " + fmt(worst, 3) + ", " + fmt(secs, 3) +
                   " s");
}

bool same_layer(const Layer<float>& a, const Layer<float>& b) { return a.weight == b.weight && a.bias == b.bias; }

// 3. Freezing keeps lower layers bit-identical and leaves upper gradients unchanged.
Outcome freeze_contract() {
  const auto t0 = Clock::now();
  Checks c;
  // Gradients on the full-size default model for one fixed batch.
  {
    const auto cfg = default_config(28, 128);
    const auto p = init_xavier<float>(cfg, Alphabet::english(), 3);
    std::mt19937_64 rng(3);
    const auto x1 = random_features(rng, 420, 128), x2 = random_features(rng, 380, 128);
    const auto batch = make_batch<float>({&x1, &x2});
    const LabelSeq y1 = Alphabet::english().encode("hello world"), y2 = Alphabet::english().encode("transfer");
    const std::vector<const LabelSeq*> labels{&y1, &y2};
    const auto f0 = forward(p, batch, true, 0);
    const auto f8 = forward(p, batch, true, 8);
    c.expect(f0.log_probs == f8.log_probs, "forward output depends on k");
    const auto g0 = backward(p, f0, batch_ctc_loss(f0, labels, 28).grad, make_freeze_mask(cfg, 0));
    const auto g8 = backward(p, f8, batch_ctc_loss(f8, labels, 28).grad, make_freeze_mask(cfg, 8));
    for (int l = 0; l < 11; ++l) {
      if (l < 8) {
        c.expect(!g8.has(l), "frozen layer " + std::to_string(l + 1) + " has a gradient");
        continue;
      }
      const auto& a = *g0.layers[static_cast<std::size_t>(l)];
      const auto& b = *g8.layers[static_cast<std::size_t>(l)];
      c.expect(*a.weight == *b.weight && *a.bias == *b.bias, "layer " + std::to_string(l + 1) + " gradient differs");
    }
  }
  // 200-step transfer run with k = 8.
  const auto run = desk_config();
  const auto base = init_xavier<float>(run.model_config(28), Alphabet::english(), 4);
  SynthSet s;
  s.count = 40;
  s.seed = 4;
  const auto data = synth_utterances(synth::target_language(), s, run.frontend);
  Trainer t(prepare_transfer(base, {8, false, Alphabet::german_extra(), 4}), 8, run.training.adam());
  TrainOptions opt;
  opt.batch_size = 8;
  opt.max_steps = 200;
  const auto summary = train(t, data, opt);
  c.expect(summary.steps == 200, "ran " + std::to_string(summary.steps) + " steps");
  for (int l = 0; l < 8; ++l) {
    c.expect(same_layer(t.params().layers[static_cast<std::size_t>(l)], base.layers[static_cast<std::size_t>(l)]),
             "layer " + std::to_string(l + 1) + " changed");
  }
  c.expect(!(t.params().layers[8].weight == base.layers[8].weight), "layer 9 did not train");
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "runtime " + fmt(secs) + " s");
  return c.outcome("layers 1-8 bit-identical after 200 steps; layers 9-11 gradients bit-identical to k=0; " +
                   fmt(secs, 3) + " s");
}

// Shared by criteria 4 and 5: the default kernel schedule at 64 channels.
struct ScaledSetup {
  ModelConfig config = wav2letter_config(28, 128, 64, 64);
  std::vector<Utterance> batch;

  ScaledSetup() {
    std::mt19937_64 rng(5);
    const Alphabet a = Alphabet::english();
    const char* texts[] = {"the quick brown fox", "jumps over", "the lazy dog", "transfer learning"};
    for (const char* t : texts) {
      Utterance u;
      u.text = t;
      u.labels = a.encode(t);
      u.features = random_features(rng, 500, 128);
      batch.push_back(std::move(u));
    }
  }

  std::vector<const Utterance*> pointers() const {
    std::vector<const Utterance*> out;
    for (const auto& u : batch) out.push_back(&u);
    return out;
  }
};

// 4. Median step time falls as more layers are frozen.
Outcome step_time() {
  const auto t0 = Clock::now();
  const ScaledSetup setup;
  const auto params = init_xavier<float>(setup.config, Alphabet::english(), 6);
  const std::vector<int> ks{0, 4, 8};
  std::vector<Trainer> trainers;
  for (int k : ks) trainers.emplace_back(params, k);
  const auto batch = setup.pointers();
  std::vector<std::vector<double>> times(ks.size());
  for (auto& t : trainers) t.step(batch);  // warm-up
  // Interleaved so that drift in machine load affects every k alike.
  for (int i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < ks.size(); ++j) {
      const auto s0 = Clock::now();
      const auto st = trainers[j].step(batch);
      times[j].push_back(seconds_since(s0));
      if (!st.updated) return {false, "step did not update"};
    }
  }
  std::vector<double> med;
  for (auto& v : times) {
    std::sort(v.begin(), v.end());
    med.push_back(0.5 * (v[24] + v[25]));
  }
  const double secs = seconds_since(t0);
  Checks c;
  c.expect(med[0] > med[1] && med[1] > med[2], "medians not strictly decreasing");
  c.expect(secs < 600.0, "runtime " + fmt(secs) + " s");
  return c.outcome("median ms/step k=0 " + fmt(1e3 * med[0]) + ", k=4 " + fmt(1e3 * med[1]) + ", k=8 " +
                   fmt(1e3 * med[2]) + "; " + fmt(secs, 3) + " s");
}

// 5. Transient activation and gradient bytes per step.
Outcome memory() {
  const ScaledSetup setup;
  const auto params = init_xavier<float>(setup.config, Alphabet::english(), 6);
  const auto batch = setup.pointers();
  std::vector<std::size_t> peaks;
  Checks c;
  for (int k : {0, 4, 8}) {
    Trainer t(params, k);
    BufferMeter meter;
    t.step(batch, &meter);
    c.expect(meter.current() == 0, "buffers leaked at k=" + std::to_string(k));
    peaks.push_back(meter.peak());
  }
  const double ratio = static_cast<double>(peaks[2]) / static_cast<double>(peaks[0]);
  c.expect(ratio <= 0.6, "k=8 / k=0 = " + fmt(ratio));
  return c.outcome("peak bytes k=0 " + std::to_string(peaks[0]) + ", k=4 " + std::to_string(peaks[1]) + ", k=8 " +
                   std::to_string(peaks[2]) + "; k=8/k=0 = " + fmt(ratio, 3));
}

// Smoothed loss curves of one seed of the two-language experiment.
struct SeedCurves {
  std::uint64_t seed = 0;
  double pretrain_final = 0.0;
  std::vector<double> retained, reinit, retained_k0, scratch;
  double seconds = 0.0;
};

SeedCurves run_transfer_seed(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto task = transfer_task(seed);
  const auto& cfg = task.config;
  const auto src = synth::source_language(), tgt = synth::target_language();
  const auto source_data = synth_utterances(src, task.source, cfg.frontend);
  const auto target_data = synth_utterances(tgt, task.target, cfg.frontend);
  SeedCurves out;
  out.seed = seed;

  Trainer base(init_xavier<float>(cfg.model_config(src.alphabet.size()), src.alphabet, seed), 0, cfg.training.adam());
  TrainOptions pre;
  pre.batch_size = cfg.training.batch_size;
  pre.max_steps = task.pretrain_steps;
  pre.seed = seed;
  out.pretrain_final = smoothed_losses(train(base, source_data, pre).log, task.smoothing_window).back();

  // Every transfer-phase run sees the same batch order.
  TrainOptions opt = pre;
  opt.max_steps = task.transfer_steps;
  opt.seed = seed + 1000;
  auto curve = [&](ModelParams<float> p, int k) {
    Trainer t(std::move(p), k, cfg.training.adam());
    return smoothed_losses(train(t, target_data, opt).log, task.smoothing_window);
  };
  const auto extra = Alphabet::german_extra();
  out.retained = curve(prepare_transfer(base.params(), {8, false, extra, seed + 7}), 8);
  out.reinit = curve(prepare_transfer(base.params(), {8, true, extra, seed + 7}), 8);
  out.retained_k0 = curve(prepare_transfer(base.params(), {0, false, extra, seed + 7}), 0);
  out.scratch = curve(init_xavier<float>(cfg.model_config(tgt.alphabet.size()), tgt.alphabet, seed + 7), 0);
  out.seconds = seconds_since(t0);
  return out;
}

const std::vector<SeedCurves>& transfer_runs() {
  static const std::vector<SeedCurves> runs = [] {
    std::vector<SeedCurves> r;
    for (std::uint64_t seed : {1, 2, 3}) r.push_back(run_transfer_seed(seed));
    return r;
  }();
  return runs;
}

// 6. Retained weights beat re-initialized ones at k = 8.
Outcome retain_vs_reinit() {
  Checks c;
  std::string detail;
  double total = 0.0;
  for (const auto& r : transfer_runs()) {
    const int every = transfer_task(r.seed).checkpoint_every;
    int wins = 0, n = 0;
    for (std::size_t s = static_cast<std::size_t>(every) - 1; s < r.retained.size(); s += static_cast<std::size_t>(every)) {
      ++n;
      wins += r.retained[s] <= r.reinit[s];
    }
    const double frac = static_cast<double>(wins) / n;
    const std::string tag = "seed " + std::to_string(r.seed);
    c.expect(frac >= 0.9, tag + " wins " + std::to_string(wins) + "/" + std::to_string(n));
    c.expect(r.retained.back() < r.reinit.back(), tag + " final " + fmt(r.retained.back()) + " vs " + fmt(r.reinit.back()));
    detail += tag + ": " + std::to_string(wins) + "/" + std::to_string(n) + ", final " + fmt(r.retained.back(), 3) +
              " < " + fmt(r.reinit.back(), 3) + "; ";
    total += r.seconds;
  }
  c.expect(total < 1800.0, "runtime " + fmt(total) + " s");
  return c.outcome(detail + "experiment " + fmt(total, 3) + " s");
}

// 7. Transfer with all layers trainable catches up with training from scratch.
Outcome scratch_vs_transfer() {
  Checks c;
  std::string detail;
  for (const auto& r : transfer_runs()) {
    const double target = r.scratch.back();
    int reached = -1;
    for (std::size_t s = 0; s < r.retained_k0.size(); ++s) {
      if (r.retained_k0[s] <= target) {
        reached = static_cast<int>(s) + 1;
        break;
      }
    }
    const std::string tag = "seed " + std::to_string(r.seed);
    c.expect(reached > 0 && reached <= 500, tag + " reached at " + std::to_string(reached));
    detail += tag + ": scratch@1000 " + fmt(target, 3) + " reached at step " + std::to_string(reached) + "; ";
  }
  return c.outcome(detail);
}

const NGramModel& toy_lm() {
  static const NGramModel m = train_ngram({{"a", "ab"}, {"b"}, {"ba", "a"}, {"a", "a", "b"}}, 2, 0.1);
  return m;
}

Mat<double> log_of(std::initializer_list<std::initializer_list<double>> rows) {
  Mat<double> m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index t = 0;
  for (const auto& r : rows) {
    Eigen::Index k = 0;
    for (double v : r) m(t, k++) = std::log(v);
    ++t;
  }
  return m;
}

// 8. Prefix beam search against exhaustive enumeration.
Outcome decoder_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  Checks c;
  int runs = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int T = std::uniform_int_distribution<int>(1, 5)(rng);
    const int C = std::uniform_int_distribution<int>(2, 4)(rng);
    const Alphabet a = C == 2 ? Alphabet({"a"}) : C == 3 ? Alphabet({"a", " "}) : Alphabet({"a", "b", " "});
    const auto lp = random_log_probs(rng, T, C, 1.5);
    for (bool with_lm : {false, true}) {
      DecoderConfig cfg;
      cfg.beam_width = 256;
      cfg.lm = with_lm ? &toy_lm() : nullptr;
      const auto beam = beam_search_decode(lp, a, cfg);
      const auto oracle = exhaustive_oracle(lp, a, cfg);
      c.expect(beam.labels == oracle.labels && std::abs(beam.total - oracle.total) <= 1e-9,
               "trial " + std::to_string(trial) + (with_lm ? " with LM" : " without LM"));
      ++runs;
    }
  }
  const Alphabet one({"a"});
  const auto lp = log_of({{0.4, 0.6}, {0.4, 0.6}});
  DecoderConfig cfg;
  cfg.beam_width = 8;
  const auto beam = beam_search_decode(lp, one, cfg);
  const auto greedy = greedy_decode(lp, one);
  c.expect(beam.transcript == "a", "blank-heavy case beam gave '" + beam.transcript + "'");
  c.expect(greedy.transcript.empty(), "blank-heavy case greedy gave '" + greedy.transcript + "'");
  const double secs = seconds_since(t0);
  c.expect(secs < 120.0, "runtime " + fmt(secs) + " s");
  return c.outcome(std::to_string(runs) + " decodes agree; P(blank)=0.6 case: beam 'a', greedy ''; " + fmt(secs, 3) +
                   " s");
}

const char* kToyArpa = R"(\data\
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

bool arpa_equal(const NGramModel& a, const NGramModel& b, double tol) {
  if (a.order() != b.order()) return false;
  for (int n = 1; n <= a.order(); ++n) {
    if (a.count(n) != b.count(n)) return false;
    for (const auto& [key, e] : a.table(n)) {
      NGramModel::Key k2;
      for (int id : key) k2.push_back(b.word_id(a.word(id)));
      const auto* e2 = b.find(k2);
      if (e2 == nullptr || std::abs(e2->log10_prob - e.log10_prob) > tol ||
          std::abs(e2->log10_backoff - e.log10_backoff) > tol) {
        return false;
      }
    }
  }
  return true;
}

// 9. Backoff chains, ARPA round trip, valid-word bonus.
Outcome lm_correctness() {
  Checks c;
  std::istringstream in(kToyArpa);
  const auto m = parse_arpa(in);
  using H = std::vector<std::string>;
  const std::pair<double, double> chains[] = {
      {log_prob_backoff(m, "b", H{"<s>", "a"}), -0.05},
      {log_prob_backoff(m, "b", H{"a"}), -0.25},
      {log_prob_backoff(m, "c", H{"a"}), -0.2 - 1.3},
      {log_prob_backoff(m, "c", H{"<s>", "a"}), -0.1 - 0.2 - 1.3},
      {log_prob_backoff(m, "c", H{"a", "b"}), -0.15 - 0.9},
      {score_sentence(m, {"a", "b"}), -0.4 - 0.05 + (-0.15 - 0.3 - 0.7)},
  };
  for (const auto& [got, want] : chains) c.expect(std::abs(got - want) <= 1e-9, "chain " + fmt(got) + " vs " + fmt(want));

  std::ostringstream out;
  write_arpa(out, m);
  std::istringstream back_in(out.str());
  c.expect(arpa_equal(m, parse_arpa(back_in), 1e-6), "toy ARPA round trip");
  const auto trained = train_ngram({{"der", "hund"}, {"die", "katze"}, {"der", "hund", "bellt"}}, 3, 0.05);
  std::ostringstream out2;
  write_arpa(out2, trained);
  std::istringstream back2(out2.str());
  c.expect(arpa_equal(trained, parse_arpa(back2), 1e-6), "trained ARPA round trip");

  const Alphabet abc({"a", "b", "c"});
  const auto vocab = train_ngram({{"ab"}}, 2, 0.0);
  const auto lp = log_of({{0.97, 0.01, 0.01, 0.01}, {0.01, 0.40, 0.50, 0.09}});
  DecoderConfig cfg;
  cfg.beam_width = 16;
  cfg.lm = &vocab;
  cfg.w_lm = 0.0;
  cfg.w_valid_word = 0.0;
  const auto before = beam_search_decode(lp, abc, cfg).transcript;
  cfg.w_valid_word = 2.3;
  const auto after = beam_search_decode(lp, abc, cfg).transcript;
  c.expect(before == "ac" && after == "ab", "valid-word flip gave '" + before + "' -> '" + after + "'");
  return c.outcome("6 backoff chains exact, ARPA round trips within 1e-6, w_valid_word=2.3 flips 'ac' -> 'ab'");
}

int recursive_distance(const std::vector<std::string>& a, std::size_t i, const std::vector<std::string>& b, std::size_t j) {
  if (i == a.size()) return static_cast<int>(b.size() - j);
  if (j == b.size()) return static_cast<int>(a.size() - i);
  return std::min({recursive_distance(a, i + 1, b, j) + 1, recursive_distance(a, i, b, j + 1) + 1,
                   recursive_distance(a, i + 1, b, j + 1) + (a[i] == b[j] ? 0 : 1)});
}

// 10. Edit distances and error rates.
Outcome metrics_check() {
  Checks c;
  c.expect(char_edit_distance("kitten", "sitting") == 3, "kitten -> sitting");
  const std::string ref = "sechsundneunzig", hyp = "sechs un nmeunsche";
  const double w = wer(ref, hyp), l = ler(ref, hyp);
  c.expect(w == 3.0, "WER " + fmt(w));
  c.expect(std::lround(100.0 * l) == 47, "LER " + fmt(100.0 * l) + "%");
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> len(0, 6), ch(0, 2);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::string> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    std::string sa, sb;
    for (auto& x : a) sa += (x = std::string(1, static_cast<char>('a' + ch(rng))));
    for (auto& x : b) sb += (x = std::string(1, static_cast<char>('a' + ch(rng))));
    c.expect(char_edit_distance(sa, sb) == recursive_distance(a, 0, b, 0), "'" + sa + "' vs '" + sb + "'");
  }
  return c.outcome("kitten->sitting 3; example WER " + fmt(100.0 * w) + "%, LER " + fmt(100.0 * l) +
                   "%; DP = recursion on 2000 pairs");
}

// 11. A tiny model memorizes ten synthetic utterances.
Outcome overfit() {
  const auto t0 = Clock::now();
  const auto cfg = desk_config();
  SynthSet s;
  s.count = 10;
  s.seed = 11;
  const auto src = synth::source_language();
  const auto data = synth_utterances(src, s, cfg.frontend);
  AdamHyper h = cfg.training.adam();
  h.lr = 1e-3;
  Trainer t(init_xavier<float>(cfg.model_config(src.alphabet.size()), src.alphabet, 11), 0, h);
  TrainOptions opt;
  opt.batch_size = 10;
  opt.max_steps = 50;
  DecoderConfig dc;
  dc.beam_width = 1;
  double ler_now = 1.0, loss = 0.0;
  std::int64_t steps = 0;
  for (std::uint64_t round = 1; seconds_since(t0) < 300.0; ++round) {
    opt.seed = round;
    loss = train(t, data, opt).log.back().batch_loss;
    steps += opt.max_steps;
    ler_now = evaluate(t.params(), data, dc).greedy.pooled_ler();
    if (ler_now < 0.05) break;
  }
  const double secs = seconds_since(t0);
  Checks c;
  c.expect(ler_now < 0.05, "LER " + fmt(100 * ler_now) + "%");
  c.expect(secs < 300.0, "runtime " + fmt(secs) + " s");
  return c.outcome("greedy LER " + fmt(100 * ler_now, 3) + "% after " + std::to_string(steps) + " steps (loss " +
                   fmt(loss, 3) + "), " + fmt(secs, 3) + " s");
}

// 12. Checkpoints and alphabet extension.
Outcome checkpoint_and_extension() {
  Checks c;
  const auto cfg = desk_config();
  const auto p = init_xavier<float>(cfg.model_config(28), Alphabet::english(), 12);
  Trainer t(p, 3);
  SynthSet s;
  s.count = 8;
  const auto data = synth_utterances(synth::source_language(), s, cfg.frontend);
  TrainOptions opt;
  opt.batch_size = 4;
  opt.max_steps = 4;
  train(t, data, opt);
  const auto ck = t.checkpoint();
  const auto back = decode_checkpoint(encode_checkpoint(ck));
  c.expect(back.step == ck.step, "step counter");
  c.expect(back.params.config == ck.params.config && back.params.alphabet.labels() == ck.params.alphabet.labels(),
           "config or alphabet");
  for (int l = 0; l < p.num_layers(); ++l) {
    const auto i = static_cast<std::size_t>(l);
    c.expect(same_layer(back.params.layers[i], ck.params.layers[i]), "weights of layer " + std::to_string(l + 1));
    const auto& ma = ck.adam->layers[i];
    const auto& mb = back.adam->layers[i];
    c.expect(ma.has_value() == mb.has_value(), "adam presence at layer " + std::to_string(l + 1));
    if (ma && mb) {
      c.expect(ma->m_weight == mb->m_weight && ma->v_weight == mb->v_weight && ma->m_bias == mb->m_bias &&
                   ma->v_bias == mb->v_bias,
               "adam moments at layer " + std::to_string(l + 1));
    }
  }
  c.expect(encode_checkpoint(back) == encode_checkpoint(ck), "re-encoding differs");

  const auto& trained = t.params();
  const auto ext = extend_alphabet(trained, Alphabet::german_extra());
  for (int l = 0; l + 1 < trained.num_layers(); ++l) {
    c.expect(same_layer(ext.layers[static_cast<std::size_t>(l)], trained.layers[static_cast<std::size_t>(l)]),
             "extension changed layer " + std::to_string(l + 1));
  }
  const auto& old_top = trained.layers.back();
  const auto& new_top = ext.layers.back();
  c.expect(new_top.weight.topRows(28) == old_top.weight.topRows(28) && new_top.bias.head(28) == old_top.bias.head(28),
           "old label rows");
  c.expect(new_top.weight.row(32) == old_top.weight.row(28) && new_top.bias(32) == old_top.bias(28), "blank row");
  std::mt19937_64 rng(12);
  double spread = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto x = random_features(rng, 120 + 17 * trial, cfg.frontend.n_mels);
    const auto fwd = forward(ext, make_batch<float>({&x}));
    const Mat<double> prob = fwd.sequence(0).cast<double>().array().exp();
    for (Eigen::Index r = 0; r < prob.rows(); ++r) {
      const auto row = prob.row(r).segment(28, 4);
      spread = std::max(spread, row.maxCoeff() - row.minCoeff());
    }
  }
  c.expect(spread <= 1e-7, "new-label probability spread " + fmt(spread));
  return c.outcome("checkpoint bytes and values round-trip exactly; extension keeps old weights, new-label spread " +
                   fmt(spread, 3));
}

// 13. STFT, normalization and frame counts.
Outcome frontend_check() {
  Checks c;
  FrontendConfig cfg;
  Waveform w;
  w.sample_rate = 16000;
  for (int i = 0; i < 4096; ++i) w.samples.push_back(std::sin(2.0 * M_PI * 1000.0 * i / 16000.0));
  const auto power = stft_power(w, cfg);
  for (Eigen::Index r = 0; r < power.rows(); ++r) {
    Eigen::Index arg = 0;
    power.row(r).maxCoeff(&arg);
    c.expect(arg == 32, "frame " + std::to_string(r) + " peaks at bin " + std::to_string(arg));
  }
  std::mt19937_64 rng(13);
  const auto mel = random_features(rng, 300, 128).array().exp().matrix().eval();
  const auto n = normalize(mel).frames;
  const double mean = n.mean();
  const double sd = std::sqrt((n.array() - mean).square().mean());
  c.expect(std::abs(mean) <= 1e-6 && std::abs(sd - 1.0) <= 1e-6, "mean " + fmt(mean) + ", std " + fmt(sd));
  Waveform z;
  for (std::size_t len = 512; len <= 20000; ++len) {
    const int expected = static_cast<int>((len - 512) / 128 + 1);
    z.samples.assign(len, 0.0);
    if (num_stft_frames(len, cfg) != expected || stft_power(z, cfg).rows() != expected) {
      c.expect(false, "frame count at N=" + std::to_string(len));
      break;
    }
  }
  return c.outcome("1 kHz peaks at bin 32 in all " + std::to_string(power.rows()) + " frames; normalized mean " +
                   fmt(mean, 2) + ", std-1 " + fmt(sd - 1.0, 2) + "; frame counts exact for N in [512, 20000]");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"CTC oracle equivalence", ctc_oracle},
      {"end-to-end gradient check", gradient_check},
      {"freeze contract", freeze_contract},
      {"step time falls with k", step_time},
      {"transient memory at k=8", memory},
      {"retained vs reinitialized weights", retain_vs_reinit},
      {"scratch vs transfer", scratch_vs_transfer},
      {"decoder oracle", decoder_oracle},
      {"language model", lm_correctness},
      {"metrics", metrics_check},
      {"overfit sanity", overfit},
      {"checkpoint and alphabet extension", checkpoint_and_extension},
      {"frontend", frontend_check},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    failed += !o.pass;
    std::printf("%s  %2d  %-36s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
