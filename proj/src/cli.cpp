// Copyright 2026 The phocnet-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "phocnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "phocnet/augment.hpp"
#include "phocnet/data.hpp"
#include "phocnet/image_io.hpp"
#include "phocnet/model.hpp"
#include "phocnet/phoc.hpp"
#include "phocnet/pipeline.hpp"
#include "phocnet/retrieval.hpp"
#include "phocnet/synthetic.hpp"
#include "phocnet/train.hpp"

namespace phocnet::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::vector<std::size_t> parse_levels(const std::string& text, const char* flag) {
  std::vector<std::size_t> levels;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size() || item[0] == '-') {
      throw UsageError(std::string(flag) + ": expected comma-separated positive integers, got '" + text + "'");
    }
    levels.push_back(v);
  }
  if (levels.empty()) throw UsageError(std::string(flag) + ": no levels given");
  return levels;
}

struct PhocFlags {
  std::string alphabet = "latin36";
  std::string levels = "2,3,4,5";
  std::string bigrams;  // file
  std::string bigram_levels = "2";

  void add(CLI::App* app) {
    app->add_option("--alphabet", alphabet, "latin36, a symbol file, or a literal symbol string")
        ->capture_default_str();
    app->add_option("--levels", levels, "unigram pyramid levels")->capture_default_str();
    app->add_option("--bigrams", bigrams, "bigram file (one pair per line)");
    app->add_option("--bigram-levels", bigram_levels, "bigram pyramid levels")->capture_default_str();
  }

  Alphabet make_alphabet() const {
    if (alphabet == "latin36") return build_alphabet(alphabet);
    if (std::filesystem::is_regular_file(alphabet)) return load_alphabet_file(alphabet);
    try {
      return build_alphabet(utf8_symbols(alphabet));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--alphabet: ") + e.what());
    }
  }

  PhocConfig make_config() const {
    std::vector<std::string> pairs;
    if (!bigrams.empty()) pairs = load_bigram_file(bigrams);
    Alphabet symbols = make_alphabet();
    try {
      return PhocConfig(std::move(symbols), parse_levels(levels, "--levels"), std::move(pairs),
                        parse_levels(bigram_levels, "--bigram-levels"));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
};

std::vector<WordSample> pick_split(const Dataset& dataset, const std::string& split) {
  if (split == "all") return dataset.samples();
  return dataset.subset(split == "train" ? Split::kTrain : Split::kTest).samples();
}

void report_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

// ---------------------------------------------------------------------------

struct SynthCmd {
  std::string out_dir;
  std::string words_file;
  std::size_t random = 30;
  std::size_t min_len = 3;
  std::size_t max_len = 7;
  SyntheticOptions options;
  bool no_variation = false;

  void add(CLI::App* app) {
    app->add_option("--out", out_dir, "output directory")->required();
    app->add_option("--words", words_file, "word list, one per line (default: random words)");
    app->add_option("--random", random, "number of random words when --words is absent")->capture_default_str();
    app->add_option("--min-len", min_len, "random word minimum length")->capture_default_str();
    app->add_option("--max-len", max_len, "random word maximum length")->capture_default_str();
    app->add_option("--samples-per-class", options.samples_per_class, "images per word")->capture_default_str();
    app->add_option("--train-ratio", options.train_ratio, "fraction of each class in the train split")
        ->capture_default_str();
    app->add_option("--factor-min", options.sampling.factor_min, "affine factor lower limit")->capture_default_str();
    app->add_option("--factor-max", options.sampling.factor_max, "affine factor upper limit")->capture_default_str();
    app->add_option("--seed", options.seed, "random seed")->capture_default_str();
    app->add_flag("--no-variation", no_variation, "render every sample without warping");
  }

  int run(std::ostream& out, std::ostream&) {
    options.variation = !no_variation;
    std::vector<std::string> words;
    if (!words_file.empty()) {
      const Alphabet latin = build_alphabet("latin36");
      for (const auto& w : load_word_list(words_file)) {
        auto n = normalize_transcription(w, latin);
        if (n.empty()) throw std::runtime_error(words_file + ": word '" + w + "' is empty after normalization");
        words.push_back(std::move(n));
      }
    } else {
      words = random_words(random, min_len, max_len, options.seed);
    }
    const Dataset d = build_synthetic_dataset(words, options, out_dir);
    out << "wrote " << d.size() << " samples of " << words.size() << " classes to "
        << (std::filesystem::path(out_dir) / "manifest.tsv").string() << '\n';
    return kExitOk;
  }
};

struct AugmentCmd {
  std::string manifest;
  std::string out_dir;
  std::string alphabet = "latin36";
  BalanceOptions options;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "input manifest")->required();
    app->add_option("--out", out_dir, "output directory for images and manifest.tsv")->required();
    app->add_option("--target", options.target_total, "total training samples after balancing")
        ->capture_default_str();
    app->add_option("--factor-min", options.sampling.factor_min, "affine factor lower limit")->capture_default_str();
    app->add_option("--factor-max", options.sampling.factor_max, "affine factor upper limit")->capture_default_str();
    app->add_option("--seed", options.seed, "random seed")->capture_default_str();
    app->add_option("--alphabet", alphabet, "alphabet used to normalize transcriptions")->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) {
    PhocFlags flags;
    flags.alphabet = alphabet;
    const Dataset input = load_manifest(manifest, flags.make_alphabet());
    report_warnings(input.warnings, err);
    const Dataset train = input.subset(Split::kTrain);
    if (train.empty()) throw std::runtime_error(manifest + ": no training samples to augment");
    auto augmented = balance_augment(train.samples(), options);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir / "images");
    std::size_t written = 0;
    for (std::size_t k = 0; k < augmented.size(); ++k) {
      auto& s = augmented[k];
      if (!s.image_path.empty()) continue;
      s.image_path = dir / "images" / ("aug_" + std::to_string(k) + ".pgm");
      save_pgm(s.image, s.image_path);
      ++written;
    }
    const auto test = input.subset(Split::kTest).samples();
    augmented.insert(augmented.end(), test.begin(), test.end());
    write_manifest(Dataset(std::move(augmented)), dir / "manifest.tsv");
    out << "wrote " << options.target_total << " training samples (" << written << " warped) and " << test.size()
        << " test samples to " << (dir / "manifest.tsv").string() << '\n';
    return kExitOk;
  }
};

struct PhocCmd {
  PhocFlags flags;
  bool dim_only = false;
  std::vector<std::string> words;
  std::string manifest;
  std::size_t top_bigrams = 0;
  std::string out_file;
  std::string format = "binary";
  std::string split = "all";

  void add(CLI::App* app) {
    flags.add(app);
    app->add_flag("--dim-only", dim_only, "print the PHOC dimension and exit");
    app->add_option("words", words, "transcriptions to encode");
    app->add_option("--manifest", manifest, "manifest for --top-bigrams or --out");
    app->add_option("--top-bigrams", top_bigrams, "print the K most frequent bigrams of the manifest");
    app->add_option("--out", out_file, "write ground-truth PHOCs of the manifest as predictions");
    app->add_option("--format", format, "prediction file format")
        ->check(CLI::IsMember({"binary", "tsv"}))
        ->capture_default_str();
    app->add_option("--split", split, "manifest split to use")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
  }

  int run(std::ostream& out, std::ostream& err) {
    if (top_bigrams > 0) {
      if (manifest.empty()) throw UsageError("--top-bigrams requires --manifest");
      const Alphabet alphabet = flags.make_alphabet();
      const Dataset d = load_manifest(manifest, alphabet, {.load_images = false});
      report_warnings(d.warnings, err);
      std::vector<std::string> texts;
      for (const auto& s : pick_split(d, split)) texts.push_back(s.transcription);
      for (const auto& b : select_bigrams(texts, top_bigrams, alphabet)) out << b << '\n';
      return kExitOk;
    }
    const PhocConfig config = flags.make_config();
    if (dim_only) {
      out << config.dimension() << '\n';
      return kExitOk;
    }
    if (!out_file.empty()) {
      if (manifest.empty()) throw UsageError("--out requires --manifest");
      const Dataset d = load_manifest(manifest, config.alphabet(), {.load_images = false});
      report_warnings(d.warnings, err);
      const auto samples = pick_split(d, split);
      write_predictions(ground_truth_predictions(samples, config), out_file,
                        format == "tsv" ? PredictionFormat::kTsv : PredictionFormat::kBinary);
      out << "wrote " << samples.size() << " ground-truth vectors to " << out_file << '\n';
      return kExitOk;
    }
    if (words.empty()) throw UsageError("nothing to do: give words, --dim-only, --top-bigrams or --out");
    for (const auto& w : words) {
      const std::string n = normalize_transcription(w, config.alphabet());
      if (n.empty()) throw std::runtime_error("word '" + w + "' is empty after normalization");
      const PhocVector v = encode_phoc(n, config);
      out << n << '\t';
      for (float b : v.bits) out << (b != 0.0f ? '1' : '0');
      out << '\n';
    }
    return kExitOk;
  }
};

struct TrainCmd {
  PhocFlags flags;
  std::string manifest;
  std::string model_out;
  std::string log_out;
  std::string arch = "phocnet-full";
  std::string mode = "phoc";
  std::string config_file;
  std::vector<std::string> sets;
  std::string resume;
  bool print_config = false;
  std::optional<std::size_t> iterations, lr_drop, batch_size, threads, log_every;
  std::optional<double> lr, momentum, weight_decay, lr_factor;
  std::string loss_normalization;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    flags.add(app);
    app->add_option("--manifest", manifest, "training manifest (train split is used)");
    app->add_option("--out", model_out, "model file to write");
    app->add_option("--log", log_out, "training log TSV");
    app->add_option("--arch", arch, "architecture preset")
        ->check(CLI::IsMember({"phocnet-full", "phocnet-mini"}))
        ->capture_default_str();
    app->add_option("--mode", mode, "phoc (sigmoid head) or softmax (baseline, longer schedule)")
        ->check(CLI::IsMember({"phoc", "softmax"}))
        ->capture_default_str();
    app->add_option("--config", config_file, "key=value configuration file");
    app->add_option("--set", sets, "configuration override key=value (repeatable)");
    app->add_option("--resume", resume, "continue training from this model file");
    app->add_flag("--print-config", print_config, "print the resolved configuration and exit");
    app->add_option("--iterations", iterations, "total_iterations");
    app->add_option("--lr", lr, "base_lr");
    app->add_option("--lr-drop", lr_drop, "lr_drop_iteration");
    app->add_option("--batch-size", batch_size, "batch_size");
    app->add_option("--threads", threads, "worker threads (default: available cores)");
    app->add_option("--log-every", log_every, "log interval in iterations");
    app->add_option("--seed", seed, "random seed (default 42)");
    app->add_option("--momentum", momentum, "momentum");
    app->add_option("--weight-decay", weight_decay, "weight_decay");
    app->add_option("--lr-factor", lr_factor, "lr_drop_factor");
    app->add_option("--loss-normalization", loss_normalization, "loss_normalization")
        ->check(CLI::IsMember({"mean", "sum"}));
  }

  TrainConfig resolve() const {
    TrainConfig c = mode == "softmax" ? softmax_preset() : TrainConfig{};
    c.threads = default_threads();
    if (!config_file.empty()) c = load_train_config(config_file, c);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
      try {
        apply_config_entry(c, kv.substr(0, eq), kv.substr(eq + 1));
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--set: ") + e.what());
      }
    }
    c.mode = mode == "softmax" ? TrainMode::kSoftmax : TrainMode::kPhoc;
    if (iterations) c.total_iterations = *iterations;
    if (lr) c.base_lr = *lr;
    if (lr_drop) c.lr_drop_iteration = *lr_drop;
    if (batch_size) c.batch_size = *batch_size;
    if (threads) c.threads = *threads;
    if (log_every) c.log_every = *log_every;
    if (seed) c.seed = *seed;
    if (momentum) c.momentum = *momentum;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (lr_factor) c.lr_drop_factor = *lr_factor;
    if (!loss_normalization.empty()) apply_config_entry(c, "loss_normalization", loss_normalization);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }

  int run(std::ostream& out, std::ostream& err) {
    const TrainConfig config = resolve();
    const PhocConfig phoc = flags.make_config();
    if (print_config) {
      out << format_train_config(config) << "# architecture=" << arch << "\n# phoc=" << phoc.to_json()
          << "\n# phoc_dimension=" << phoc.dimension() << '\n';
      return kExitOk;
    }
    if (manifest.empty() || model_out.empty()) throw UsageError("train requires --manifest and --out");
    const Dataset all = load_manifest(manifest, phoc.alphabet());
    report_warnings(all.warnings, err);
    const Dataset data = all.subset(Split::kTrain);
    if (data.empty()) throw std::runtime_error(manifest + ": no training samples");
    NetworkModel model = resume.empty()
                             ? make_model(arch, config.mode, phoc, class_list(data), config.seed)
                             : load_model(resume);
    const auto examples = make_training_examples(data.samples(), model);
    TrainCallbacks callbacks;
    callbacks.on_log = [&err](const TrainLogRecord& r) {
      err << "iter " << r.iteration + 1 << " loss " << r.loss << " lr " << r.lr << " t " << r.elapsed_seconds
          << "s\n";
    };
    const TrainLog log = train(examples, model, config, callbacks);
    save_model(model, model_out);
    if (!log_out.empty()) log.write_tsv(std::filesystem::path(log_out));
    out << "trained " << arch << " (" << (config.mode == TrainMode::kPhoc ? "phoc" : "softmax") << ") for "
        << config.total_iterations << " iterations; model written to " << model_out << '\n';
    return kExitOk;
  }
};

const Alphabet& model_alphabet(const NetworkModel& model, std::optional<Alphabet>& storage) {
  if (model.metadata().phoc) return model.metadata().phoc->alphabet();
  storage = build_alphabet("latin36");
  return *storage;
}

struct PredictCmd {
  std::string model_file;
  std::string manifest;
  std::string out_file;
  std::string format = "binary";
  std::string split = "test";
  std::size_t threads = default_threads();

  void add(CLI::App* app) {
    app->add_option("--model", model_file, "model file")->required();
    app->add_option("--manifest", manifest, "manifest to run on")->required();
    app->add_option("--out", out_file, "prediction file")->required();
    app->add_option("--format", format, "binary or tsv")
        ->check(CLI::IsMember({"binary", "tsv"}))
        ->capture_default_str();
    app->add_option("--split", split, "manifest split")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    app->add_option("--threads", threads, "worker threads (default: available cores)");
  }

  int run(std::ostream& out, std::ostream& err) {
    const NetworkModel model = load_model(model_file);
    std::optional<Alphabet> storage;
    const Dataset d = load_manifest(manifest, model_alphabet(model, storage));
    report_warnings(d.warnings, err);
    const auto samples = pick_split(d, split);
    const auto predictions = predict(model, samples, threads);
    write_predictions(predictions, out_file, format == "tsv" ? PredictionFormat::kTsv : PredictionFormat::kBinary);
    out << "wrote " << predictions.size() << " predictions to " << out_file << '\n';
    return kExitOk;
  }
};

struct EvalCmd {
  PhocFlags flags;
  std::string protocol;
  std::string predictions_file;
  std::string model_file;
  std::string manifest;
  std::string split = "test";
  std::string exclude_file;
  std::string report_file;
  std::size_t threads = default_threads();

  void add(CLI::App* app) {
    flags.add(app);
    app->add_option("--protocol", protocol, "qbe or qbs")->required()->check(CLI::IsMember({"qbe", "qbs"}));
    app->add_option("--predictions", predictions_file, "prediction file (binary or TSV)");
    app->add_option("--model", model_file, "model file (with --manifest)");
    app->add_option("--manifest", manifest, "manifest (with --model)");
    app->add_option("--split", split, "manifest split")
        ->check(CLI::IsMember({"train", "test", "all"}))
        ->capture_default_str();
    app->add_option("--exclude", exclude_file, "words never used as queries (QbS)");
    app->add_option("--out", report_file, "per-query report TSV");
    app->add_option("--threads", threads, "worker threads (default: available cores)");
  }

  int run(std::ostream& out, std::ostream& err) {
    const bool from_file = !predictions_file.empty();
    if (from_file == (!model_file.empty() || !manifest.empty())) {
      throw UsageError("eval needs either --predictions or both --model and --manifest");
    }
    if (!from_file && (model_file.empty() || manifest.empty())) {
      throw UsageError("--model and --manifest must be given together");
    }
    std::vector<PredictedSample> predictions;
    std::optional<PhocConfig> phoc;
    if (from_file) {
      predictions = read_predictions(predictions_file);
      if (protocol == "qbs") phoc = flags.make_config();
    } else {
      const NetworkModel model = load_model(model_file);
      std::optional<Alphabet> storage;
      const Dataset d = load_manifest(manifest, model_alphabet(model, storage));
      report_warnings(d.warnings, err);
      predictions = predict(model, pick_split(d, split), threads);
      if (protocol == "qbs") {
        if (model.head() != Head::kSigmoid || !model.metadata().phoc) {
          throw std::runtime_error(model_file + ": QbS needs a model with a PHOC output");
        }
        phoc = model.metadata().phoc;
      }
    }
    EvalReport report;
    if (protocol == "qbe") {
      report = evaluate_qbe(predictions);
    } else {
      QbsOptions options;
      if (!exclude_file.empty()) {
        for (const auto& w : load_word_list(exclude_file)) {
          options.exclude.insert(normalize_transcription(w, phoc->alphabet()));
        }
      }
      report = evaluate_qbs(predictions, *phoc, options);
    }
    report_warnings(report.warnings, err);
    if (!report_file.empty()) {
      std::ofstream file(report_file, std::ios::trunc);
      if (!file) throw std::runtime_error(report_file + ": cannot open for writing");
      report.write_tsv(file);
      file << "# " << report.summary() << '\n';
      if (!file) throw std::runtime_error(report_file + ": write failed");
    }
    out << report.summary() << '\n';
    return kExitOk;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Word spotting with PHOC attribute CNNs", args.empty() ? "phocnet" : args.front()};
  app.require_subcommand(1);
  SynthCmd synth;
  AugmentCmd augment;
  PhocCmd phoc;
  TrainCmd train_cmd;
  PredictCmd predict_cmd;
  EvalCmd eval;
  CLI::App* synth_app = app.add_subcommand("synth", "render a synthetic word-image dataset");
  CLI::App* augment_app = app.add_subcommand("augment", "class-balanced affine augmentation of a manifest");
  CLI::App* phoc_app = app.add_subcommand("phoc", "PHOC dimensions, encodings and bigram statistics");
  CLI::App* train_app = app.add_subcommand("train", "train a model on a manifest");
  CLI::App* predict_app = app.add_subcommand("predict", "write predicted vectors for a manifest");
  CLI::App* eval_app = app.add_subcommand("eval", "QbE / QbS mean average precision");
  synth.add(synth_app);
  augment.add(augment_app);
  phoc.add(phoc_app);
  train_cmd.add(train_app);
  predict_cmd.add(predict_app);
  eval.add(eval_app);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("phocnet");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (synth_app->parsed()) return synth.run(out, err);
    if (augment_app->parsed()) return augment.run(out, err);
    if (phoc_app->parsed()) return phoc.run(out, err);
    if (train_app->parsed()) return train_cmd.run(out, err);
    if (predict_app->parsed()) return predict_cmd.run(out, err);
    if (eval_app->parsed()) return eval.run(out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace phocnet::cli
