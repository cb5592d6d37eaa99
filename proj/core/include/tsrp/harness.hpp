#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsrp/backbone.hpp"
#include "tsrp/config_file.hpp"
#include "tsrp/dataio.hpp"
#include "tsrp/forecaster.hpp"
#include "tsrp/metrics.hpp"
#include "tsrp/trainer.hpp"

namespace tsrp {

enum class Protocol { Short, Long, FewShot, ZeroShot };

std::string_view to_string(Protocol p) noexcept;
Protocol parse_protocol(std::string_view s);

struct PlantPair {
  std::string source;
  std::string target;
  friend bool operator==(const PlantPair&, const PlantPair&) = default;
};

inline const std::vector<double> kDefaultFractions{0.05, 0.10, 0.20, 0.50};
inline const std::vector<std::string> kModelNames{"tsreprogram", "persistence", "dlinear"};

struct ExperimentConfig {
  Protocol protocol = Protocol::Short;
  /// Empty: every plant in the data set.
  std::vector<std::string> plants;
  /// Empty: {12, 24} for short, {192, 336} otherwise.
  std::vector<std::size_t> horizons;
  /// Ignored by the short protocol (always 2·H); 336 otherwise unless set.
  std::optional<std::size_t> input_len;
  std::vector<double> fractions = kDefaultFractions;
  /// Empty: every ordered pair of distinct plants.
  std::vector<PlantPair> pairs;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<std::string> models{"tsreprogram"};

  /// Directory with manifest.csv and <plant_id>.csv; empty selects the synthetic fixture.
  std::filesystem::path data_dir;
  std::size_t synth_days = 60;
  std::uint64_t synth_seed = 7;

  std::size_t train_stride = 1;
  std::size_t val_stride = 1;
  std::size_t test_stride = 1;

  TrainConfig train;
  ForecasterConfig model;
  BackboneConfig backbone;
  std::filesystem::path backbone_path;
  std::size_t dlinear_kernel = 25;

  bool traces = true;
  std::size_t jobs = 1;
  std::size_t prefix_cache_mb = 768;

  /// Horizons and input length after protocol defaults.
  std::vector<std::size_t> resolved_horizons() const;
  std::size_t resolved_input_len(std::size_t horizon) const;
  void validate() const;
};

/// Applies one `key = value` setting; ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
ExperimentConfig experiment_config_from(const KeyValueFile& file);
/// Recognized keys, in documentation order.
const std::vector<std::string>& experiment_config_keys();

struct PlantDataset {
  PlantManifest plant;
  TimeSeries series;  // preprocessed, capacity-normalized
};

/// Cloud levels of the three fixture plants.
inline constexpr double kFixtureCloud[] = {0.35, 0.5, 0.65};

/// Raw MW series of the synthetic fixture (one per default plant).
std::vector<TimeSeries> synth_fixture_raw(std::size_t days, std::uint64_t seed);
std::vector<PlantDataset> load_datasets(const ExperimentConfig& cfg);
/// Writes manifest.csv and <plant_id>.csv files for the fixture.
void write_fixture(const std::filesystem::path& dir, std::size_t days, std::uint64_t seed);

struct ReportRow {
  std::string plant;
  std::size_t horizon = 0;
  std::string protocol;
  std::string model;
  std::uint64_t seed = 0;
  MetricsReport metrics;
  std::size_t input_len = 0;
  std::optional<double> fraction;
  std::size_t train_windows = 0;
};

inline constexpr std::string_view kReportHeader =
    "plant,horizon,protocol,model,seed,mse,mae,r2_raw,r2_reported,smape,input_len,fraction,train_windows,n";

std::string report_csv(std::span<const ReportRow> rows);
std::vector<ReportRow> parse_report(std::string_view csv);
std::vector<ReportRow> read_report(const std::filesystem::path& path);

enum class LogLevel { Info, Warn };
using LogSink = std::function<void(LogLevel, const std::string&)>;

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::filesystem::path report_path;
  std::filesystem::path summary_path;
  std::vector<std::filesystem::path> traces;
  std::vector<std::string> warnings;
};

/// Runs every (plant or pair, horizon, fraction, model, seed) cell, writes
/// report.csv, summary.csv and forecast traces under `out_dir`.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                const LogSink& log = {});

/// Same, on already prepared data; nothing is written when out_dir is empty.
ExperimentResult run_experiment(const ExperimentConfig& cfg, std::span<const PlantDataset> data,
                                const std::filesystem::path& out_dir, const LogSink& log = {});

struct SummaryRow {
  std::string protocol;
  std::string model;
  std::size_t horizon = 0;
  std::optional<double> fraction;
  std::size_t n_plants = 0;
  std::size_t n_seeds = 0;
  std::size_t rows = 0;
  double mse = 0.0, mae = 0.0, r2_raw = 0.0, r2_reported = 0.0, smape = 0.0;
  /// Per metric: 1 best, 2 second best, 0 otherwise, among models in the same
  /// (protocol, horizon, fraction) group. Order: mse, mae, r2_reported, smape.
  int rank[4] = {0, 0, 0, 0};
};

/// Groups by (protocol, model, horizon, fraction) and averages over plants and seeds.
std::vector<SummaryRow> summarize(std::span<const ReportRow> rows);
std::string summary_csv(std::span<const SummaryRow> rows);

}  // namespace tsrp
