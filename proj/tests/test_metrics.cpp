#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tsrp/error.hpp"
#include "tsrp/metrics.hpp"

using namespace tsrp;

TEST(Metrics, HandFixtures) {
  const std::vector<double> one{1.0}, three{3.0};
  EXPECT_EQ(smape(one, three), 100.0);
  EXPECT_EQ(mae(one, three), 2.0);
  EXPECT_EQ(mse(one, three), 4.0);
  const std::vector<double> y{1, 2, 3, 6}, mean(4, 3.0);
  EXPECT_EQ(r2(y, mean).raw, 0.0);
  EXPECT_EQ(r2(y, y).raw, 1.0);
  const std::vector<double> zeros(3, 0.0);
  EXPECT_EQ(smape(zeros, zeros), 0.0);
}

TEST(Metrics, NegativeR2IsReportedAsZero) {
  const std::vector<double> y{0, 1, 0, 1}, f{1, 0, 1, 0};
  const R2 r = r2(y, f);
  EXPECT_EQ(r.raw, -3.0);
  EXPECT_EQ(r.reported, 0.0);
}

TEST(Metrics, MatchLoopOracleOn100Pairs) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t n = 2 + seed * 7 % 300;
    auto y = testing_util::random_vector(n, seed, 0.0, 1.0);
    const auto f = testing_util::random_vector(n, seed + 500, 0.0, 1.0);
    if (seed % 4 == 0) y[0] = 0.0;
    const MetricsReport m = compute_metrics(y, f);
    const oracle::Metrics o = oracle::loop_metrics(y, f);
    EXPECT_NEAR(m.mae, o.mae, 1e-12);
    EXPECT_NEAR(m.mse, o.mse, 1e-12);
    EXPECT_NEAR(m.r2_raw, o.r2, 1e-12);
    EXPECT_NEAR(m.smape, o.smape, 1e-12);
    EXPECT_EQ(m.n, n);
  }
}

TEST(Metrics, Errors) {
  const std::vector<double> empty, a{1, 2}, b{1};
  EXPECT_THROW(mae(empty, empty), ShapeError);
  EXPECT_THROW(mse(a, b), ShapeError);
  EXPECT_THROW(r2(b, b), DegenerateError);
  EXPECT_THROW(r2(std::vector<double>{2, 2}, a), DegenerateError);
}

TEST(Metrics, FormatRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 0.0031, 1e-17, 123456.789}) EXPECT_EQ(std::stod(format_metric(v)), v);
  EXPECT_EQ(format_metric(0.25), "0.25");
}
