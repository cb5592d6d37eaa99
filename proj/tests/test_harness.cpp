#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "tsrp/config_file.hpp"
#include "tsrp/error.hpp"
#include "tsrp/harness.hpp"

using namespace tsrp;

namespace {

/// Tiny configuration: one horizon, coarse strides, a couple of epochs.
ExperimentConfig tiny(Protocol p) {
  ExperimentConfig c;
  c.protocol = p;
  c.horizons = {12};
  if (p != Protocol::Short) c.input_len = 24;
  c.synth_days = 8;
  c.seeds = {0};
  c.train_stride = 12;
  c.val_stride = 24;
  c.test_stride = 6;
  c.train.max_epochs = 2;
  c.traces = false;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(KeyValueFile, ParsesCommentsAndRejectsDuplicates) {
  const KeyValueFile f = KeyValueFile::parse("# c\n\nprotocol = long  # trailing\n seeds=1, 2\n");
  EXPECT_EQ(f.get("protocol"), "long");
  EXPECT_EQ(f.line("seeds"), 4u);
  EXPECT_EQ(split_list(f.get("seeds")), (std::vector<std::string>{"1", "2"}));
  EXPECT_THROW(KeyValueFile::parse("a = 1\na = 2\n"), ParseError);
  EXPECT_THROW(KeyValueFile::parse("just words\n"), ParseError);
  EXPECT_THROW(parse_size("-3", "x"), ConfigError);
  EXPECT_THROW(parse_double("1.5q", "x"), ConfigError);
  EXPECT_TRUE(parse_bool("true", "x"));
  EXPECT_FALSE(parse_bool("0", "x"));
}

TEST(ExperimentConfig, SettingsAndErrors) {
  ExperimentConfig c;
  apply_setting(c, "protocol", "zeroshot");
  apply_setting(c, "pairs", "A->B, C>A");
  apply_setting(c, "models", "tsreprogram, dlinear");
  apply_setting(c, "epochs", "7");
  apply_setting(c, "d_model", "8");
  EXPECT_EQ(c.protocol, Protocol::ZeroShot);
  EXPECT_EQ(c.pairs, (std::vector<PlantPair>{{"A", "B"}, {"C", "A"}}));
  EXPECT_EQ(c.train.max_epochs, 7u);
  EXPECT_EQ(c.model.patch.d_model, 8u);
  EXPECT_THROW(apply_setting(c, "colour", "red"), ConfigError);
  EXPECT_THROW(apply_setting(c, "protocol", "medium"), ConfigError);
  c.models = {"arima"};
  EXPECT_THROW(c.validate(), ConfigError);

  try {
    experiment_config_from(KeyValueFile::parse("protocol = short\nseeds = 0, x\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  for (const std::string& key : experiment_config_keys()) EXPECT_FALSE(key.empty());
}

TEST(ExperimentConfig, ProtocolDefaults) {
  ExperimentConfig s;
  EXPECT_EQ(s.resolved_horizons(), (std::vector<std::size_t>{12, 24}));
  EXPECT_EQ(s.resolved_input_len(12), 24u);
  EXPECT_EQ(s.resolved_input_len(24), 48u);
  s.input_len = 30;
  EXPECT_THROW(s.validate(), ConfigError);
  for (Protocol p : {Protocol::Long, Protocol::FewShot, Protocol::ZeroShot}) {
    ExperimentConfig c;
    c.protocol = p;
    EXPECT_EQ(c.resolved_horizons(), (std::vector<std::size_t>{192, 336}));
    EXPECT_EQ(c.resolved_input_len(192), 336u);
    EXPECT_EQ(parse_protocol(to_string(p)), p);
  }
}

TEST(Report, CsvRoundTrip) {
  ReportRow r;
  r.plant = "A->B";
  r.horizon = 12;
  r.protocol = "zeroshot";
  r.model = "tsreprogram";
  r.seed = 2;
  r.metrics = {0.1, 1.0 / 3.0, -0.5, 0.0, 12.5, 99};
  r.input_len = 24;
  r.train_windows = 10;
  ReportRow f = r;
  f.fraction = 0.05;
  const std::vector<ReportRow> rows{r, f};
  const std::string csv = report_csv(rows);
  EXPECT_EQ(csv.substr(0, kReportHeader.size()), kReportHeader);
  const auto back = parse_report(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].metrics.mse, 1.0 / 3.0);
  EXPECT_EQ(back[0].metrics.r2_raw, -0.5);
  EXPECT_FALSE(back[0].fraction);
  EXPECT_EQ(back[1].fraction, 0.05);
  EXPECT_EQ(report_csv(back), csv);
  EXPECT_THROW(parse_report("nope\n"), ParseError);
}

TEST(Summary, MeansAndRanks) {
  auto row = [](const char* plant, const char* model, std::uint64_t seed, double mse, double r2) {
    ReportRow r;
    r.plant = plant;
    r.model = model;
    r.protocol = "short";
    r.horizon = 12;
    r.seed = seed;
    r.metrics = {mse, mse, r2, std::max(0.0, r2), mse * 10, 5};
    return r;
  };
  const std::vector<ReportRow> rows{row("A", "tsreprogram", 0, 1.0, 0.9), row("B", "tsreprogram", 0, 3.0, 0.7),
                                    row("A", "persistence", 0, 4.0, 0.5), row("B", "persistence", 0, 4.0, -0.2),
                                    row("A", "dlinear", 0, 3.0, 0.6), row("B", "dlinear", 0, 3.0, 0.6)};
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 3u);
  for (const SummaryRow& r : s) {
    EXPECT_EQ(r.n_plants, 2u);
    EXPECT_EQ(r.rows, 2u);
    if (r.model == "tsreprogram") {
      EXPECT_EQ(r.mse, 2.0);
      EXPECT_EQ(r.rank[0], 1);
      EXPECT_EQ(r.rank[2], 1);
    }
    if (r.model == "dlinear") {
      EXPECT_EQ(r.rank[0], 2);
    }
    if (r.model == "persistence") {
      EXPECT_EQ(r.rank[0], 0);
      EXPECT_EQ(r.r2_reported, 0.25);
    }
  }
  EXPECT_NE(summary_csv(s).find("best"), std::string::npos);
}

TEST(Harness, FewShotUsesChronologicalPrefixCounts) {
  ExperimentConfig c = tiny(Protocol::FewShot);
  c.plants = {"B"};
  c.models = {"persistence", "dlinear"};
  const auto data = load_datasets(c);
  const ExperimentResult r = run_experiment(c, data, {});
  EXPECT_FALSE(r.warnings.empty());  // input_len 24 instead of 336
  const std::size_t total = chronological_split(data[1].series.size()).train.size();
  const std::size_t windows = (total - 36) / 12 + 1;
  std::set<double> seen;
  for (const ReportRow& row : r.rows) {
    if (row.model != "dlinear") continue;
    ASSERT_TRUE(row.fraction);
    seen.insert(*row.fraction);
    EXPECT_EQ(row.train_windows, static_cast<std::size_t>(std::ceil(*row.fraction * static_cast<double>(windows))));
  }
  EXPECT_EQ(seen.size(), 4u);
}

TEST(Harness, ZeroShotRowsAndNoTargetTraining) {
  ExperimentConfig c = tiny(Protocol::ZeroShot);
  c.models = {"tsreprogram"};
  c.pairs = {{"A", "C"}};
  c.train.max_epochs = 1;
  const ExperimentResult r = run_experiment(c, load_datasets(c), {});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].plant, "A->C");
  EXPECT_EQ(r.rows[0].protocol, "zeroshot");
}

TEST(Harness, SeedsGiveDistinctRowsAndRunsAreByteIdentical) {
  ExperimentConfig c = tiny(Protocol::Short);
  c.plants = {"A"};
  c.models = {"dlinear", "persistence"};
  c.seeds = {0, 1, 2};
  c.traces = true;
  const auto dir = std::filesystem::temp_directory_path() / "tsrp_harness_det";
  std::filesystem::remove_all(dir);
  const ExperimentResult a = run_experiment(c, dir / "a");
  c.jobs = 3;
  const ExperimentResult b = run_experiment(c, dir / "b");
  EXPECT_EQ(slurp(a.report_path), slurp(b.report_path));
  EXPECT_EQ(slurp(a.summary_path), slurp(b.summary_path));
  ASSERT_EQ(a.rows.size(), 6u);
  std::set<std::uint64_t> seeds;
  for (const ReportRow& row : a.rows)
    if (row.model == "dlinear") seeds.insert(row.seed);
  EXPECT_EQ(seeds.size(), 3u);
  ASSERT_EQ(a.traces.size(), 6u);
  EXPECT_EQ(slurp(a.traces[0]).substr(0, 31), "timestamp,truth,forecast,model\n");
  EXPECT_EQ(read_report(a.report_path).size(), 6u);
  std::filesystem::remove_all(dir);
}

TEST(Harness, FixtureFilesLoadLikeTheInMemoryFixture) {
  const auto dir = std::filesystem::temp_directory_path() / "tsrp_fixture_files";
  std::filesystem::remove_all(dir);
  write_fixture(dir, 5, 7);
  ExperimentConfig from_files;
  from_files.data_dir = dir;
  ExperimentConfig in_memory;
  in_memory.synth_days = 5;
  const auto a = load_datasets(from_files), b = load_datasets(in_memory);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a[i].plant.plant_id, b[i].plant.plant_id);
    ASSERT_EQ(a[i].series.size(), b[i].series.size());
    for (std::size_t j = 0; j < a[i].series.size(); ++j) EXPECT_NEAR(a[i].series.values[j], b[i].series.values[j], 1e-12);
  }
  std::filesystem::remove_all(dir);
}
