// Copyright 2026 The w2l-transfer Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line harness: data preparation, synthetic data, training,
// transfer, evaluation, decoding, LM training and weight introspection.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "w2l/checkpoint.hpp"
#include "w2l/config.hpp"
#include "w2l/dataset.hpp"
#include "w2l/evaluate.hpp"
#include "w2l/experiment.hpp"
#include "w2l/introspect.hpp"
#include "w2l/lm.hpp"
#include "w2l/synth.hpp"
#include "w2l/train.hpp"

namespace fs = std::filesystem;
using namespace w2l;

namespace {

// Config file plus one --section.key flag per setting.
struct ConfigOptions {
  std::string file;
  std::string preset = "full";
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "config file (key = value under [section] headers)")->check(CLI::ExistingFile);
    app->add_option("--preset", preset, "base settings before the config file")
        ->check(CLI::IsMember({"full", "desk"}));
    for (const auto& f : config_fields()) {
      app->add_option_function<std::string>(
          "--" + f.name, [this, name = f.name](const std::string& v) { overrides[name] = v; }, f.help);
    }
  }

  // Short aliases for the decoder keys.
  void attach_decoder_aliases(CLI::App* app) {
    const std::pair<const char*, const char*> aliases[] = {{"--beam-width", "decoder.beam_width"},
                                                           {"--w-lm", "decoder.w_lm"},
                                                           {"--w-valid-word", "decoder.w_valid_word"},
                                                           {"--lm", "decoder.lm"}};
    for (const auto& [flag, key] : aliases) {
      app->add_option_function<std::string>(
          flag, [this, key = std::string(key)](const std::string& v) { overrides[key] = v; },
          "same as --" + std::string(key));
    }
  }

  RunConfig resolve() const {
    RunConfig c = preset == "desk" ? desk_config() : RunConfig{};
    if (!file.empty()) c = load_config(file, c);
    for (const auto& [k, v] : overrides) set_config_value(c, k, v);
    return c;
  }
};

Alphabet alphabet_by_name(const std::string& name) {
  if (name == "english" || name == "en") return Alphabet::english();
  if (name == "german" || name == "de") return Alphabet::german();
  throw Error("unknown alphabet '" + name + "' (expected english or german)");
}

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<Utterance> load_set(const std::string& manifest_path, const FrontendConfig& frontend,
                                const Alphabet& alphabet) {
  const auto manifest = read_manifest(manifest_path);
  const auto report = filter_dataset(manifest, frontend, &alphabet);
  for (const auto& [entry, reason] : report.removed) {
    std::cerr << "skipping " << entry.audio << ": " << to_string(reason) << '\n';
  }
  if (report.kept.empty()) throw Error("no usable utterances in '" + manifest_path + "'");
  std::cerr << "loading " << report.kept.size() << " utterances\n";
  return load_utterances(report.kept, frontend, alphabet);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

// Shared by train and transfer.
void run_training(Trainer& trainer, const std::vector<Utterance>& data, const RunConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream cfg_text;
  write_config(cfg_text, cfg);
  write_text(out_dir / "config.ini", cfg_text.str());
  TrainOptions opt;
  opt.batch_size = cfg.training.batch_size;
  opt.max_steps = cfg.training.steps;
  opt.epochs = cfg.training.epochs;
  opt.seed = cfg.training.seed;
  opt.checkpoint_every = cfg.training.checkpoint_every;
  opt.checkpoint_dir = out_dir;
  std::ofstream log(out_dir / "train_log.csv");
  if (!log) throw Error("cannot write training log in '" + out_dir.string() + "'");
  const auto summary = train(trainer, data, opt, &log, [](const LogRow& r) {
    if (r.step % 50 == 0) std::cerr << "step " << r.step << "  loss " << r.batch_loss << "  " << r.wall_seconds << " s\n";
  });
  save_checkpoint(out_dir / "final.ckpt", trainer.checkpoint());
  std::cerr << "done: " << summary.steps << " steps, " << summary.epochs << " epochs, " << summary.skipped
            << " sample skips; wrote " << (out_dir / "final.ckpt").string() << '\n';
}

FrontendConfig frontend_for(const RunConfig& cfg, const ModelConfig& model) {
  FrontendConfig f = cfg.frontend;
  f.n_mels = model.n_mels;
  return f;
}

void write_histogram_csv(std::ostream& out, const ModelParams<float>& p, double width) {
  out << "layer,bin_lo,bin_hi,fraction\n" << std::setprecision(9);
  for (int l = 0; l < p.num_layers(); ++l) {
    const auto& w = p.layers[static_cast<std::size_t>(l)].weight;
    const auto edges = uniform_edges(static_cast<double>(w.minCoeff()), static_cast<double>(w.maxCoeff()), width);
    const auto f = weight_histogram(p, l, edges);
    for (std::size_t i = 0; i < f.size(); ++i) {
      out << l + 1 << ',' << edges[i] << ',' << edges[i + 1] << ',' << f[i] << '\n';
    }
  }
}

void write_diff_csv(std::ostream& out, const std::vector<LayerDiff>& diffs) {
  out << "layer,compared,max_abs,mean_abs,bin_lo,bin_hi,fraction\n" << std::setprecision(9);
  for (const auto& d : diffs) {
    if (!d.compared) {
      out << d.layer + 1 << ",0,,,,,\n";
      continue;
    }
    for (std::size_t i = 0; i < d.fractions.size(); ++i) {
      out << d.layer + 1 << ",1," << d.max_abs << ',' << d.mean_abs << ',' << d.edges[i] << ',' << d.edges[i + 1]
          << ',' << d.fractions[i] << '\n';
    }
  }
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error("cannot write '" + path + "'");
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wav2Letter-style CTC speech recognition with layer-freezing transfer"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "filter a manifest and record durations");
  ConfigOptions prepare_cfg;
  std::string prepare_in, prepare_out, prepare_alphabet = "english";
  prepare->add_option("--manifest", prepare_in, "input JSONL manifest")->required();
  prepare->add_option("--out", prepare_out, "filtered manifest")->required();
  prepare->add_option("--alphabet", prepare_alphabet, "english or german");
  prepare_cfg.attach(prepare);

  // synth-data
  auto* synth_cmd = app.add_subcommand("synth-data", "render a synthetic tone-language corpus");
  std::string synth_lang = "source", synth_dir;
  int synth_count = 100, synth_min_words = 1, synth_max_words = 3;
  std::uint64_t synth_seed = 1;
  synth::RenderConfig render;
  synth_cmd->add_option("--language", synth_lang, "source or target")->check(CLI::IsMember({"source", "target", "en", "de"}));
  synth_cmd->add_option("--count", synth_count, "number of utterances")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--out-dir", synth_dir, "output directory")->required();
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--min-words", synth_min_words);
  synth_cmd->add_option("--max-words", synth_max_words);
  synth_cmd->add_option("--noise", render.noise, "white noise standard deviation");
  synth_cmd->add_option("--frequency-jitter", render.frequency_jitter, "relative tone jitter");
  synth_cmd->add_option("--duration-jitter-ms", render.duration_jitter_ms);
  synth_cmd->add_option("--sample-rate", render.sample_rate);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model from scratch");
  ConfigOptions train_cfg;
  std::string train_manifest, train_out, train_alphabet = "english";
  train_cmd->add_option("--manifest", train_manifest)->required();
  train_cmd->add_option("--out-dir", train_out)->required();
  train_cmd->add_option("--alphabet", train_alphabet, "english or german");
  train_cfg.attach(train_cmd);
  train_cmd->add_option_function<std::string>(
      "--k", [&](const std::string& v) { train_cfg.overrides["training.freeze_k"] = v; }, "same as --training.freeze_k");

  // transfer
  auto* transfer_cmd = app.add_subcommand("transfer", "continue training a checkpoint on a new language");
  ConfigOptions transfer_cfg;
  std::string transfer_base, transfer_manifest, transfer_out, transfer_labels, transfer_alphabet;
  bool transfer_reinit = false;
  transfer_cmd->add_option("--base", transfer_base, "checkpoint to start from")->required()->check(CLI::ExistingFile);
  transfer_cmd->add_option("--manifest", transfer_manifest)->required();
  transfer_cmd->add_option("--out-dir", transfer_out)->required();
  transfer_cmd->add_option("--new-labels", transfer_labels, "comma-separated labels to append, e.g. ä,ö,ü,ß");
  transfer_cmd->add_option("--target-alphabet", transfer_alphabet,
                           "english or german; appends whatever labels the base lacks");
  transfer_cmd->add_flag("--reinit", transfer_reinit, "re-initialize every unfrozen layer");
  transfer_cfg.attach(transfer_cmd);
  transfer_cmd->add_option_function<std::string>(
      "--k", [&](const std::string& v) { transfer_cfg.overrides["training.freeze_k"] = v; },
      "same as --training.freeze_k");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "greedy and beam decoding report");
  ConfigOptions eval_cfg;
  std::string eval_ckpt, eval_manifest, eval_out;
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--manifest", eval_manifest)->required();
  eval_cmd->add_option("--out", eval_out, "report CSV (default stdout)");
  eval_cfg.attach(eval_cmd);
  eval_cfg.attach_decoder_aliases(eval_cmd);

  // decode
  auto* decode_cmd = app.add_subcommand("decode", "transcribe audio files");
  ConfigOptions decode_cfg;
  std::string decode_ckpt;
  std::vector<std::string> decode_audio;
  decode_cmd->add_option("--checkpoint", decode_ckpt)->required()->check(CLI::ExistingFile);
  decode_cmd->add_option("audio", decode_audio, "WAV files")->required();
  decode_cfg.attach(decode_cmd);
  decode_cfg.attach_decoder_aliases(decode_cmd);

  // lm-train
  auto* lm_cmd = app.add_subcommand("lm-train", "train an add-k n-gram model and write ARPA");
  std::string lm_corpus, lm_out;
  int lm_order = 4;
  double lm_k = 0.01;
  lm_cmd->add_option("--corpus", lm_corpus, "text file, one sentence per line")->required()->check(CLI::ExistingFile);
  lm_cmd->add_option("--out", lm_out, "ARPA output")->required();
  lm_cmd->add_option("--order", lm_order)->check(CLI::Range(1, 10));
  lm_cmd->add_option("--k", lm_k, "add-k smoothing constant")->check(CLI::NonNegativeNumber);

  // introspect
  auto* intro = app.add_subcommand("introspect", "weight histograms, diffs and filters");
  intro->require_subcommand(1);
  auto* hist_cmd = intro->add_subcommand("histogram", "per-layer weight histograms");
  std::string hist_ckpt, hist_out;
  double hist_width = 0.2;
  hist_cmd->add_option("--checkpoint", hist_ckpt)->required()->check(CLI::ExistingFile);
  hist_cmd->add_option("--bin-width", hist_width)->check(CLI::PositiveNumber);
  hist_cmd->add_option("--out", hist_out);
  auto* diff_cmd = intro->add_subcommand("diff", "per-layer |a - b| histograms");
  std::string diff_a, diff_b, diff_out;
  double diff_width = 0.01;
  diff_cmd->add_option("--a", diff_a)->required()->check(CLI::ExistingFile);
  diff_cmd->add_option("--b", diff_b)->required()->check(CLI::ExistingFile);
  diff_cmd->add_option("--bin-width", diff_width)->check(CLI::PositiveNumber);
  diff_cmd->add_option("--out", diff_out);
  auto* filt_cmd = intro->add_subcommand("filters", "export one layer's filters");
  std::string filt_ckpt, filt_other, filt_out;
  int filt_layer = 1;
  filt_cmd->add_option("--checkpoint", filt_ckpt)->required()->check(CLI::ExistingFile);
  filt_cmd->add_option("--layer", filt_layer, "1-based layer index");
  filt_cmd->add_option("--against", filt_other, "second checkpoint; adds a diff column")->check(CLI::ExistingFile);
  filt_cmd->add_option("--out", filt_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      const auto cfg = prepare_cfg.resolve();
      const auto alphabet = alphabet_by_name(prepare_alphabet);
      const auto report = filter_dataset(read_manifest(prepare_in), cfg.frontend, &alphabet);
      write_manifest(prepare_out, report.kept);
      std::cout << "kept " << report.kept.size() << '\n';
      for (auto r : {RemovalReason::TooLong, RemovalReason::EmptyTranscript, RemovalReason::UnreadableAudio,
                     RemovalReason::UnsupportedCharacters}) {
        std::cout << to_string(r) << ": " << report.count(r) << '\n';
      }
      for (const auto& m : report.messages) std::cerr << m << '\n';
    } else if (synth_cmd->parsed()) {
      if (synth_min_words < 1 || synth_max_words < synth_min_words) throw Error("need 1 <= min-words <= max-words");
      const auto lang = synth::language_by_name(synth_lang);
      fs::create_directories(synth_dir);
      std::mt19937_64 rng(synth_seed);
      Manifest manifest;
      std::ofstream corpus(fs::path(synth_dir) / "corpus.txt");
      for (int i = 0; i < synth_count; ++i) {
        const auto text = synth::random_sentence(lang, rng, synth_min_words, synth_max_words);
        const auto wave = synth::render(text, lang, render, rng);
        std::ostringstream name;
        name << lang.name << '_' << std::setw(6) << std::setfill('0') << i << ".wav";
        save_wav(fs::path(synth_dir) / name.str(), wave);
        manifest.push_back({name.str(), text, wave.duration_seconds()});
        corpus << text << '\n';
      }
      write_manifest(fs::path(synth_dir) / "manifest.jsonl", manifest);
      std::cout << "wrote " << synth_count << " utterances to " << synth_dir << '\n';
    } else if (train_cmd->parsed()) {
      const auto cfg = train_cfg.resolve();
      cfg.validate();
      const auto alphabet = alphabet_by_name(train_alphabet);
      const auto data = load_set(train_manifest, cfg.frontend, alphabet);
      Trainer trainer(init_xavier<float>(cfg.model_config(alphabet.size()), alphabet, cfg.training.seed),
                      cfg.training.freeze_k, cfg.training.adam());
      run_training(trainer, data, cfg, train_out);
    } else if (transfer_cmd->parsed()) {
      auto cfg = transfer_cfg.resolve();
      const auto base = load_checkpoint(transfer_base);
      cfg.frontend = frontend_for(cfg, base.params.config);
      cfg.validate();
      TransferSetup setup;
      setup.freeze_k = cfg.training.freeze_k;
      setup.reinit = transfer_reinit;
      setup.seed = cfg.training.seed;
      setup.new_labels = split_labels(transfer_labels);
      if (!transfer_alphabet.empty()) {
        const auto target = alphabet_by_name(transfer_alphabet);
        for (const auto& l : target.labels()) {
          if (!base.params.alphabet.contains(l) &&
              std::find(setup.new_labels.begin(), setup.new_labels.end(), l) == setup.new_labels.end()) {
            setup.new_labels.push_back(l);
          }
        }
      }
      auto params = prepare_transfer(base.params, setup);
      std::cerr << "output classes " << base.params.alphabet.num_classes() << " -> " << params.alphabet.num_classes()
                << ", k = " << setup.freeze_k << (setup.reinit ? ", reinitialized" : ", retained") << '\n';
      const auto data = load_set(transfer_manifest, cfg.frontend, params.alphabet);
      Trainer trainer(std::move(params), cfg.training.freeze_k, cfg.training.adam());
      run_training(trainer, data, cfg, transfer_out);
    } else if (eval_cmd->parsed() || decode_cmd->parsed()) {
      const bool eval = eval_cmd->parsed();
      auto cfg = (eval ? eval_cfg : decode_cfg).resolve();
      const auto ck = load_checkpoint(eval ? eval_ckpt : decode_ckpt);
      cfg.frontend = frontend_for(cfg, ck.params.config);
      std::optional<NGramModel> lm;
      if (!cfg.decoder.lm.empty()) lm = load_arpa(cfg.decoder.lm);
      DecoderConfig dc;
      dc.beam_width = cfg.decoder.beam_width;
      dc.w_lm = cfg.decoder.w_lm;
      dc.w_valid_word = cfg.decoder.w_valid_word;
      dc.lm = lm ? &*lm : nullptr;
      dc.validate();
      if (eval) {
        const auto data = load_set(eval_manifest, cfg.frontend, ck.params.alphabet);
        const auto report = evaluate(ck.params, data, dc);
        std::ofstream file;
        write_eval_csv(open_out(eval_out, file), report);
        std::cerr << "greedy LER " << report.greedy.mean_ler() << " WER " << report.greedy.mean_wer() << "; beam LER "
                  << report.beam.mean_ler() << " WER " << report.beam.mean_wer() << '\n';
      } else {
        const int min_frames = min_input_frames(ck.params.config);
        for (const auto& path : decode_audio) {
          const auto feats = extract_features(load_audio(path), cfg.frontend);
          if (feats.num_frames() < min_frames) {
            std::cout << path << "\t(too short)\n";
            continue;
          }
          const auto fwd = forward(ck.params, make_batch<float>({&feats.frames}));
          const Mat<double> lp = fwd.sequence(0).cast<double>();
          std::cout << path << '\t' << beam_search_decode(lp, ck.params.alphabet, dc).transcript << '\t'
                    << greedy_decode(lp, ck.params.alphabet).transcript << '\n';
        }
      }
    } else if (lm_cmd->parsed()) {
      std::ifstream in(lm_corpus);
      const auto lm = train_ngram(tokenize_corpus(in), lm_order, lm_k);
      save_arpa(lm_out, lm);
      std::cout << "wrote " << lm_out << '\n';
    } else if (hist_cmd->parsed()) {
      std::ofstream file;
      write_histogram_csv(open_out(hist_out, file), load_checkpoint(hist_ckpt).params, hist_width);
    } else if (diff_cmd->parsed()) {
      std::ofstream file;
      const auto a = load_checkpoint(diff_a), b = load_checkpoint(diff_b);
      write_diff_csv(open_out(diff_out, file), weight_diff(a.params, b.params, diff_width));
    } else if (filt_cmd->parsed()) {
      const auto a = load_checkpoint(filt_ckpt);
      std::optional<Checkpoint> b;
      if (!filt_other.empty()) b = load_checkpoint(filt_other);
      std::ofstream file;
      write_filters_csv(open_out(filt_out, file), export_filters(a.params, filt_layer - 1, b ? &b->params : nullptr));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
