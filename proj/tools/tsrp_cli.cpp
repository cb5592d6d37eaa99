// Command line front end: synth, prep, train, eval, experiment, summarize.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tsrp/baselines.hpp"
#include "tsrp/config_file.hpp"
#include "tsrp/dataio.hpp"
#include "tsrp/error.hpp"
#include "tsrp/harness.hpp"
#include "tsrp/trainer.hpp"

namespace fs = std::filesystem;
using namespace tsrp;

namespace {

constexpr int kUsageExit = 2;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 3;
    case ErrorKind::Data: return 4;
    case ErrorKind::Parse: return 5;
    case ErrorKind::Format: return 6;
    case ErrorKind::Shape: return 7;
    case ErrorKind::Numeric: return 8;
    case ErrorKind::Degenerate: return 9;
  }
  return 1;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TSRP_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return "tsrp-out";
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
  out << text;
}

void log_sink(LogLevel level, const std::string& msg) {
  if (level == LogLevel::Warn) {
    spdlog::warn("{}", msg);
  } else {
    spdlog::info("{}", msg);
  }
}

struct CommonOptions {
  std::string config;
  std::string out;
  std::string data;
  std::vector<std::size_t> horizons;
  std::optional<std::size_t> input_len;
  std::vector<std::uint64_t> seeds;
  std::size_t jobs = 0;
};

ExperimentConfig base_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : experiment_config_from(KeyValueFile::load(o.config));
  if (!o.data.empty()) cfg.data_dir = o.data;
  if (!o.horizons.empty()) cfg.horizons = o.horizons;
  if (o.input_len) cfg.input_len = o.input_len;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (o.jobs != 0) cfg.jobs = o.jobs;
  return cfg;
}

const PlantDataset& pick_plant(const std::vector<PlantDataset>& data, const std::string& id) {
  for (const PlantDataset& d : data)
    if (d.plant.plant_id == id) return d;
  throw ConfigError(fmt::format("no data for plant '{}'", id));
}

ForecasterConfig model_config(const ExperimentConfig& cfg, std::size_t horizon, std::optional<std::size_t> input_len,
                              std::uint64_t seed) {
  ForecasterConfig m = cfg.model;
  m.horizon = horizon;
  m.input_len = input_len.value_or(2 * horizon);
  m.seed = seed;
  return m;
}

int cmd_synth(const std::string& out, std::size_t days, std::uint64_t seed) {
  const fs::path dir = output_root(out);
  write_fixture(dir, days, seed);
  spdlog::info("wrote {} days for plants A, B, C to {}", days, dir.string());
  return 0;
}

int cmd_prep(const CommonOptions& o, const std::string& plant) {
  if (o.data.empty()) throw UsageError("prep needs --data <dir>");
  ExperimentConfig cfg = base_config(o);
  if (!plant.empty()) cfg.plants = {plant};
  const fs::path dir = output_root(o.out);
  fs::create_directories(dir);
  for (const PlantDataset& d : load_datasets(cfg)) {
    const Splits sp = chronological_split(d.series.size());
    std::string text = "timestamp,power_norm,split\n";
    for (std::size_t i = 0; i < d.series.size(); ++i) {
      const char* split = sp.train.contains(i, i + 1) ? "train" : sp.val.contains(i, i + 1) ? "val" : "test";
      text += fmt::format("{},{},{}\n", format_timestamp(d.series.timestamp(i)), d.series.values[i], split);
    }
    const fs::path path = dir / (d.plant.plant_id + "_clean.csv");
    write_file(path, text);
    spdlog::info("{}: {} points, train {} / val {} / test {} -> {}", d.plant.plant_id, d.series.size(),
                 sp.train.size(), sp.val.size(), sp.test.size(), path.string());
  }
  return 0;
}

int cmd_train(const CommonOptions& o, const std::string& plant) {
  ExperimentConfig cfg = base_config(o);
  const std::size_t horizon = cfg.resolved_horizons().front();
  const std::uint64_t seed = cfg.seeds.front();
  const std::vector<PlantDataset> data = load_datasets(cfg);
  const PlantDataset& d = pick_plant(data, plant);
  const PlantData pd(d.plant, d.series, chronological_split(d.series.size()));
  ForecasterConfig mc = model_config(cfg, horizon, cfg.input_len, seed);
  auto backbone = cfg.backbone_path.empty() ? std::make_shared<const Backbone>(cfg.backbone)
                                            : std::make_shared<const Backbone>(Backbone::load_external(cfg.backbone_path));
  ModelState state = ModelState::init(mc, backbone);
  const WindowSet tr = pd.train_windows(mc.input_len, horizon, cfg.train_stride);
  const WindowSet va = pd.val_windows(mc.input_len, horizon, cfg.val_stride);
  spdlog::info("training on plant {}: L={} H={} seed={} ({} train / {} val windows, {} trainable scalars)", plant,
               mc.input_len, horizon, seed, tr.size(), va.size(), state.trainable_count());
  TrainConfig tc = cfg.train;
  tc.seed = seed;
  const TrainHistory h = train(state, tr, &va, tc, nullptr, [](const EpochLog& e) {
    spdlog::info("epoch {}: train {:.6f} val {:.6f}", e.epoch, e.train_loss, e.val_loss);
  });
  const fs::path dir = output_root(o.out);
  fs::create_directories(dir);
  save_model(dir / "model.tsrp", state);
  std::string hist = "epoch,train_loss,val_loss\n";
  for (std::size_t i = 0; i < h.train_loss.size(); ++i)
    hist += fmt::format("{},{},{}\n", i, h.train_loss[i], i < h.val_loss.size() ? format_metric(h.val_loss[i]) : "");
  write_file(dir / "history.csv", hist);
  spdlog::info("best epoch {}; checkpoint written to {}", h.best_epoch, (dir / "model.tsrp").string());
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& checkpoint, const std::string& plant) {
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint <file>");
  ExperimentConfig cfg = base_config(o);
  ModelState state = load_model(checkpoint);
  const std::vector<PlantDataset> data = load_datasets(cfg);
  const PlantDataset& d = pick_plant(data, plant);
  const PlantData pd(d.plant, d.series, chronological_split(d.series.size()));
  const WindowSet test = pd.test_windows(state.config.input_len, state.config.horizon, cfg.test_stride);
  const Evaluation ev = evaluate(state, test);
  ReportRow row;
  row.plant = plant;
  row.horizon = state.config.horizon;
  row.protocol = "eval";
  row.model = "tsreprogram";
  row.seed = state.config.seed;
  row.metrics = ev.metrics;
  row.input_len = state.config.input_len;
  const fs::path dir = output_root(o.out);
  write_file(dir / "report.csv", report_csv(std::span<const ReportRow>(&row, 1)));
  fmt::print("mse {} mae {} r2 {} (raw {}) smape {}\n", format_metric(ev.metrics.mse), format_metric(ev.metrics.mae),
             format_metric(ev.metrics.r2_reported), format_metric(ev.metrics.r2_raw), format_metric(ev.metrics.smape));
  return 0;
}

int cmd_experiment(const CommonOptions& o, const std::string& protocol, const std::vector<double>& fractions,
                   const std::string& source, const std::string& target, const std::vector<std::string>& models) {
  if (o.config.empty() && protocol.empty())
    throw UsageError("experiment needs --config <file> or --protocol <name>");
  ExperimentConfig cfg = base_config(o);
  if (!protocol.empty()) cfg.protocol = parse_protocol(protocol);
  if (!fractions.empty()) cfg.fractions = fractions;
  if (!models.empty()) cfg.models = models;
  if (!source.empty() || !target.empty()) {
    if (source.empty() || target.empty()) throw UsageError("--source and --target must be given together");
    cfg.pairs = {{source, target}};
  }
  const fs::path dir = output_root(o.out);
  const ExperimentResult r = run_experiment(cfg, dir, log_sink);
  spdlog::info("{} report rows -> {}", r.rows.size(), r.report_path.string());
  spdlog::info("summary -> {}", r.summary_path.string());
  return 0;
}

int cmd_summarize(const std::string& report, const std::string& out) {
  if (report.empty()) throw UsageError("summarize needs --report <file>");
  const std::vector<ReportRow> rows = read_report(report);
  const std::vector<SummaryRow> summary = summarize(rows);
  const std::string csv = summary_csv(summary);
  if (!out.empty() || std::getenv("TSRP_OUT_DIR") != nullptr) write_file(output_root(out) / "summary.csv", csv);
  fmt::print("{}", csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reprogrammed frozen-transformer forecasting for photovoltaic power"};
  app.require_subcommand(1);
  spdlog::set_pattern("[%l] %v");

  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Experiment config file (key = value)");
    sub->add_option("--out", common.out, "Output directory (default $TSRP_OUT_DIR or ./tsrp-out)");
    sub->add_option("--data", common.data, "Directory with manifest.csv and <plant>.csv (default: synthetic fixture)");
  };

  std::size_t days = 60;
  std::uint64_t synth_seed = 7;
  auto* synth = app.add_subcommand("synth", "Generate the synthetic three-plant fixture");
  synth->add_option("--out", common.out, "Output directory");
  synth->add_option("--days", days, "Days per plant")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Generator seed");

  std::string plant = "A";
  std::string prep_plant;
  auto* prep = app.add_subcommand("prep", "Clean, normalize and split plant data");
  add_common(prep);
  prep->add_option("--plant", prep_plant, "Plant id (default: all)");

  auto* train_cmd = app.add_subcommand("train", "Train the forecaster on one plant");
  add_common(train_cmd);
  train_cmd->add_option("--plant", plant, "Plant id");
  train_cmd->add_option("--horizon", common.horizons, "Forecast horizon");
  train_cmd->add_option("--input-len", common.input_len, "Input length (default 2*horizon)");
  train_cmd->add_option("--seed", common.seeds, "Seed");

  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a plant's test split");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint");
  eval_cmd->add_option("--plant", plant, "Plant id");

  std::string protocol, source, target;
  std::vector<double> fractions;
  std::vector<std::string> models;
  auto* exp = app.add_subcommand("experiment", "Run a full protocol and write report, summary and traces");
  add_common(exp);
  exp->add_option("--protocol", protocol, "short | long | fewshot | zeroshot");
  exp->add_option("--horizon", common.horizons, "Forecast horizon(s)");
  exp->add_option("--input-len", common.input_len, "Input length (long, fewshot, zeroshot)");
  exp->add_option("--fraction", fractions, "Few-shot training fraction(s)");
  exp->add_option("--source", source, "Zero-shot source plant");
  exp->add_option("--target", target, "Zero-shot target plant");
  exp->add_option("--seed", common.seeds, "Seed(s)");
  exp->add_option("--model", models, "tsreprogram | persistence | dlinear");
  exp->add_option("--jobs", common.jobs, "Parallel cells");

  std::string report;
  auto* sum = app.add_subcommand("summarize", "Average a report over plants and seeds");
  sum->add_option("--report", report, "Report CSV");
  sum->add_option("--out", common.out, "Output directory for summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageExit;
  }

  try {
    if (*synth) return cmd_synth(common.out, days, synth_seed);
    if (*prep) return cmd_prep(common, prep_plant);
    if (*train_cmd) return cmd_train(common, plant);
    if (*eval_cmd) return cmd_eval(common, checkpoint, plant);
    if (*exp) return cmd_experiment(common, protocol, fractions, source, target, models);
    if (*sum) return cmd_summarize(report, common.out);
  } catch (const UsageError& e) {
    spdlog::error("usage: {}", e.what());
    return kUsageExit;
  } catch (const Error& e) {
    spdlog::error("{} error: {}", to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("error: {}", e.what());
    return 1;
  }
  return kUsageExit;
}
