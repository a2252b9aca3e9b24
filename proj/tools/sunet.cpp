// SPDX-License-Identifier: Apache-2.0
//
// sunet: gendata | train | infer | analyze
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "sunet/analysis.hpp"
#include "sunet/errors.hpp"
#include "sunet/model.hpp"
#include "sunet/run_config.hpp"
#include "sunet/synthdata.hpp"
#include "sunet/trainer.hpp"

namespace fs = std::filesystem;
using namespace sunet;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(int code, const std::string& msg) {
  std::cerr << "ERROR code=" << code << " msg=" << one_line(msg) << "\n";
  return code;
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

std::string stem(const std::string& id, int slice) { return id + "_" + std::to_string(slice); }

fs::path model_file(const fs::path& p) { return fs::is_directory(p) ? p / "model.bin" : p; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------

struct GendataArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
};

int run_gendata(const GendataArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.seed = a.seed;
  if (a.n) cfg.n = *a.n;
  const std::uint64_t seed = cfg.require_seed();
  const auto samples = generate(cfg.n, cfg.data, seed);
  ensure_dir(a.out);
  save_dataset(a.out, samples);
  std::printf("wrote %zu samples to %s\n", samples.size(), a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string config, data, out;
  bool ablate = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> learning_rate;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = load_run_config(a.config);
  if (a.seed) cfg.seed = a.seed;
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.learning_rate) cfg.train.learning_rate = *a.learning_rate;
  if (a.ablate) cfg.model.ablate_channel = true;
  cfg.train.seed = cfg.require_seed();
  cfg.train.validate();

  fs::path data_dir = a.data;
  if (data_dir.empty()) {
    if (!cfg.data_path) throw ConfigError("no dataset: pass --data or set data.path");
    data_dir = *cfg.data_path;
  }
  const auto samples = load_dataset(data_dir);
  if (samples.empty()) throw ConfigError("dataset " + data_dir.string() + " is empty");
  cfg.model.backbone.height = samples.front().image.height;
  cfg.model.backbone.width = samples.front().image.width;
  cfg.model.validate();

  ensure_dir(a.out);
  const fs::path out = a.out;
  SunetModel model(cfg.model, cfg.train.seed);
  const DatasetSplit split = split_dataset(samples, cfg.train.val_fraction);
  const TrainResult res = train(model, split, cfg.train, [&](const EpochReport& r, const SunetModel& m) {
    std::printf("epoch %zu loss=%.6f val_dsc=%.6f tau=%.4f\n", r.epoch, r.train_loss, r.val_dsc, r.tau);
    std::fflush(stdout);
    if (cfg.train.checkpoint_every && r.epoch % cfg.train.checkpoint_every == 0) {
      save_model(m, out / ("model_epoch_" + std::to_string(r.epoch) + ".bin"));
    }
  });
  save_model(model, out / "model.bin");
  write_epochs_csv(out / "epochs.csv", res.reports);
  std::printf("best epoch %zu val_dsc=%.6f -> %s\n", res.best_epoch, res.best_val_dsc,
              (out / "model.bin").c_str());
  return 0;
}

struct InferArgs {
  std::string model, data, out, config;
  std::size_t batch_size = 16;
};

int run_infer(const InferArgs& a) {
  const auto model = load_model(model_file(a.model));
  if (!a.config.empty()) {
    const RunConfig cfg = load_run_config(a.config);
    if (!model->config().ablate_channel &&
        cfg.model.channel.sentence_length != model->config().channel.sentence_length) {
      throw ConfigError("config sentence_length " + std::to_string(cfg.model.channel.sentence_length) +
                        " does not match checkpoint " + std::to_string(model->config().channel.sentence_length));
    }
  }
  const auto samples = load_dataset(a.data);
  std::vector<const Image*> images;
  for (const auto& s : samples) {
    if (s.image.height != model->config().backbone.height || s.image.width != model->config().backbone.width) {
      throw ConfigError("image " + stem(s.sample_id, s.slice_index) + " does not match the model input size");
    }
    images.push_back(&s.image);
  }
  const auto preds = predict(*model, images, a.batch_size);

  const fs::path out = a.out;
  ensure_dir(out / "masks");
  std::vector<SentenceRecord> sentences;
  std::ofstream dsc_csv(out / "dsc.csv", std::ios::binary | std::ios::trunc);
  if (!dsc_csv) throw IoError("cannot write " + (out / "dsc.csv").string());
  dsc_csv << "sample_id,slice,dsc\n";
  double total = 0.0;
  char buf[64];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    Grid<std::uint8_t> px(preds[i].mask.height, preds[i].mask.width);
    for (std::size_t p = 0; p < px.size(); ++p) px.data[p] = preds[i].mask.data[p] ? 255 : 0;
    write_pgm(out / "masks" / (stem(s.sample_id, s.slice_index) + ".pred.pgm"), px);
    const double d = dsc(preds[i].mask, s.mask);
    total += d;
    std::snprintf(buf, sizeof buf, "%.10f", d);
    dsc_csv << s.sample_id << ',' << s.slice_index << ',' << buf << '\n';
    if (preds[i].sentence) sentences.push_back({s.sample_id, s.slice_index, preds[i].sentence->ids, "infer"});
  }
  if (!dsc_csv) throw IoError("failed writing " + (out / "dsc.csv").string());
  if (!model->config().ablate_channel) write_sentences_jsonl(out / "sentences.jsonl", sentences);
  std::printf("%zu images, mean dsc=%.6f\n", samples.size(), samples.empty() ? 0.0 : total / double(samples.size()));
  return 0;
}

struct AnalyzeArgs {
  std::string sentences, stats, out, config;
  std::optional<std::size_t> min_count, max_k;
  std::optional<double> min_coverage;
};

int run_analyze(const AnalyzeArgs& a) {
  RunConfig cfg = config_or_default(a.config);
  if (a.min_count) cfg.analysis.min_count = *a.min_count;
  if (a.max_k) cfg.analysis.max_k = *a.max_k;
  if (a.min_coverage) cfg.analysis.min_coverage = *a.min_coverage;
  if (cfg.analysis.min_count < 1 || cfg.analysis.max_k < 1 ||
      !(cfg.analysis.min_coverage > 0 && cfg.analysis.min_coverage <= 1)) {
    throw ConfigError("invalid analysis options");
  }
  const auto records = join_records(read_sentences_jsonl(a.sentences), read_stats_csv(a.stats));
  const auto reports = table2_report(records, cfg.analysis);

  std::vector<std::vector<int>> ids;
  std::vector<std::string> labels;
  for (const auto& r : records) {
    ids.push_back(r.ids);
    labels.push_back(r.stats.present ? "tumor" : "normal");
  }
  const auto patterns = mine_prefixes(ids, labels, cfg.analysis.max_k, cfg.analysis.min_coverage);

  const fs::path out = a.out;
  ensure_dir(out);
  write_table2_csv(out / "table2.csv", reports);
  write_patterns(out / "patterns.txt", patterns);
  for (const auto& r : reports) {
    if (r.skipped()) {
      std::printf("%-14s %-22s skipped (%s)\n", r.outcome.c_str(), to_string(r.kind).c_str(), r.skip_reason.c_str());
    } else {
      std::printf("%-14s %-22s S*=S_%zu stat=%.4f\n", r.outcome.c_str(), to_string(r.kind).c_str(), r.best_position,
                  r.positions[r.best_position - 1].statistic);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segmentation network with an emergent-language channel"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand help for every command");

  GendataArgs g;
  auto* gendata = app.add_subcommand("gendata", "Generate a synthetic phantom dataset (PGM images + stats.csv)");
  gendata->add_option("--config", g.config, "JSON run config")->required()->check(CLI::ExistingFile);
  gendata->add_option("--out", g.out, "Output directory")->required();
  gendata->add_option("--seed", g.seed, "Override the config seed");
  gendata->add_option("--n", g.n, "Override data.n (number of samples)");

  TrainArgs t;
  auto* trainc = app.add_subcommand("train", "Train a model; writes OUT/model.bin and OUT/epochs.csv");
  trainc->add_option("--config", t.config, "JSON run config")->required()->check(CLI::ExistingFile);
  trainc->add_option("--data", t.data, "Dataset directory (default: data.path from the config)");
  trainc->add_option("--out", t.out, "Output directory")->required();
  trainc->add_flag("--ablate-channel", t.ablate, "Train the backbone-only baseline")->default_str("false");
  trainc->add_option("--seed", t.seed, "Override the config seed");
  trainc->add_option("--epochs", t.epochs, "Override train.epochs");
  trainc->add_option("--batch-size", t.batch_size, "Override train.batch_size");
  trainc->add_option("--lr", t.learning_rate, "Override train.learning_rate");

  InferArgs in;
  auto* infer = app.add_subcommand("infer", "Predict masks and sentences; writes masks/, sentences.jsonl, dsc.csv");
  infer->add_option("--model", in.model, "Checkpoint file or training output directory")->required();
  infer->add_option("--data", in.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--out", in.out, "Output directory")->required();
  infer->add_option("--config", in.config, "JSON run config to check against the checkpoint")
      ->check(CLI::ExistingFile);
  infer->add_option("--batch-size", in.batch_size, "Inference batch size")->capture_default_str();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Per-position symbol regressions and prefix patterns");
  analyze->add_option("--sentences", an.sentences, "sentences.jsonl from infer")->required();
  analyze->add_option("--stats", an.stats, "stats.csv of the same dataset")->required();
  analyze->add_option("--out", an.out, "Output directory (table2.csv, patterns.txt)")->required();
  analyze->add_option("--config", an.config, "JSON run config (analysis section)")->check(CLI::ExistingFile);
  analyze->add_option("--min-count", an.min_count, "Rare-symbol pooling threshold (default 5)");
  analyze->add_option("--max-k", an.max_k, "Longest mined prefix (default 2)");
  analyze->add_option("--min-coverage", an.min_coverage, "Minimum class coverage of a pattern (default 0.2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, e.what());
  }

  try {
    if (*gendata) return run_gendata(g);
    if (*trainc) return run_train(t);
    if (*infer) return run_infer(in);
    return run_analyze(an);
  } catch (const NumericalError& e) {
    return fail(kExitNumerical, e.what());
  } catch (const ParseError& e) {
    return fail(kExitIo, e.what());
  } catch (const JoinError& e) {
    return fail(kExitIo, e.what());
  } catch (const IoError& e) {
    return fail(kExitIo, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(kExitIo, e.what());
  } catch (const std::invalid_argument& e) {
    // ConfigError, ShapeError, DegenerateOutcome
    return fail(kExitConfig, e.what());
  } catch (const std::exception& e) {
    // remaining runtime errors are file access failures
    return fail(kExitIo, e.what());
  }
}
