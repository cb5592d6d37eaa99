#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "tsrp/error.hpp"
#include "tsrp/prompt.hpp"

using namespace tsrp;

namespace {

std::string golden() {
  std::ifstream in(std::string(TSRP_TEST_DATA) + "/prompt_golden.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  while (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

PromptFields golden_fields() {
  PromptFields f;
  f.horizon = 12;
  f.input_len = 24;
  PromptStats s;
  s.min_val = 0.0;
  s.max_val = 0.83124;
  s.median_val = 0.41236;
  s.trend = Trend::Downward;
  s.top_lags = {12, 6, 18, 3, 1};
  f.stats = s;
  return f;
}

}  // namespace

TEST(Prompt, RendersGoldenText) { EXPECT_EQ(render_prompt(golden_fields()), golden()); }

TEST(Prompt, MissingPlaceholderIsConfigError) {
  for (int drop = 0; drop < 3; ++drop) {
    PromptFields f = golden_fields();
    if (drop == 0) f.horizon.reset();
    if (drop == 1) f.input_len.reset();
    if (drop == 2) f.stats.reset();
    EXPECT_THROW(render_prompt(f), ConfigError);
  }
}

TEST(Prompt, StatisticsOfKnownWindow) {
  const std::vector<double> x{0.0, 0.2, 0.9, 0.4, 0.1, 0.0, 0.3, 0.6, 0.5, 0.8, 0.7, 0.2};
  const PromptStats s = series_stats(x);
  EXPECT_EQ(s.min_val, 0.0);
  EXPECT_EQ(s.max_val, 0.9);
  // Sorted: 0 0 .1 .2 .2 .3 | .4 ... ; lower middle of 12 values is the 6th.
  EXPECT_EQ(s.median_val, 0.3);
  EXPECT_EQ(s.trend, Trend::Upward);
  EXPECT_EQ(s.top_lags.size(), 5u);
  std::vector<double> down(x.rbegin(), x.rend());
  EXPECT_EQ(series_stats(down).trend, Trend::Downward);
}

TEST(Prompt, FlatWindowIsUpwardAndDegenerate) {
  const PromptStats s = series_stats(std::vector<double>(24, 0.0));
  EXPECT_EQ(s.trend, Trend::Upward);
  EXPECT_TRUE(s.lags_degenerate);
  EXPECT_EQ(s.median_val, 0.0);
}

TEST(Prompt, BundleCarriesStatsAndTokens) {
  const auto x = testing_util::pv_window(48, 3);
  const PromptBundle b = make_prompt(x, 24);
  EXPECT_EQ(b.stats, series_stats(x));
  EXPECT_EQ(detokenize(b.token_ids), b.text);
  EXPECT_NE(b.text.find("next 24 steps given the previous 48 steps"), std::string::npos);
  EXPECT_EQ(b.text.rfind(std::string(kDefaultDatasetContext), 0), 0u);
  EXPECT_NE(make_prompt(x, 24, "Rooftop array.").text.find("Rooftop array.\n"), std::string::npos);
}

TEST(Tokenizer, ByteRoundTrip) {
  const std::string s = "min 0.1234, \xc2\xb0 and \t tabs";
  const auto ids = tokenize(s);
  EXPECT_EQ(ids.size(), s.size());
  for (std::size_t id : ids) EXPECT_LT(id, 256u);
  EXPECT_EQ(detokenize(ids), s);
  const std::size_t bad[] = {300};
  EXPECT_THROW(detokenize(bad), ShapeError);
}
