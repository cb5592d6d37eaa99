#include <cmath>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tsrp/error.hpp"
#include "tsrp/spectral.hpp"

using namespace tsrp;

TEST(Fft, MatchesNaiveDftAcrossLengths) {
  for (std::size_t q : {1u, 2u, 3u, 7u, 16u, 24u, 100u, 127u, 336u, 512u}) {
    const auto x = testing_util::random_vector(q, q, -1.0, 1.0);
    const auto ref = oracle::naive_dft(x);
    const Spectrum s = dft(x);
    const auto mags = s.magnitudes();
    double worst = 0.0;
    for (std::size_t f = 0; f < q; ++f) {
      worst = std::max(worst, std::abs(s.coeffs[f] - ref[f]));
      worst = std::max(worst, std::abs(mags[f] - std::abs(ref[f])));
    }
    EXPECT_LT(worst, 1e-9) << "Q=" << q;
  }
}

TEST(Fft, InverseRoundTrip) {
  const auto x = testing_util::random_vector(45, 2);
  std::vector<Complex> c(x.begin(), x.end());
  const auto back = fft(fft(c), true);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i].real(), x[i], 1e-12);
}

TEST(Fft, PureTonePeaks) {
  std::vector<double> x(64);
  for (std::size_t i = 0; i < 64; ++i) x[i] = std::cos(2.0 * 3.141592653589793 * 5.0 * static_cast<double>(i) / 64.0);
  const auto m = dft(x).magnitudes();
  EXPECT_NEAR(m[5], 32.0, 1e-9);
  EXPECT_NEAR(m[59], 32.0, 1e-9);
  EXPECT_NEAR(m[4], 0.0, 1e-9);
}

TEST(Autocorrelation, MatchesBruteForce) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = testing_util::random_vector(24 + seed * 13, seed);
    const auto ref = oracle::brute_autocorrelation(x);
    const auto r = autocorrelation(x);
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(r[t], ref[t], 1e-9);
  }
}

TEST(TopLags, MatchBruteForceOn100Series) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::size_t q = 16 + seed % 7 * 40;
    const auto x = testing_util::random_vector(q, 1000 + seed);
    EXPECT_EQ(top_lags(x, 5).lags, oracle::brute_top_lags(x, 5)) << "seed " << seed;
  }
}

TEST(TopLags, PeriodicSignal) {
  std::vector<double> x(48);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * 3.141592653589793 * static_cast<double>(i) / 12.0);
  const LagResult r = top_lags(x, 5);
  EXPECT_FALSE(r.degenerate);
  EXPECT_EQ(r.lags[0], 12u);
  EXPECT_EQ(r.lags[1], 24u);
  EXPECT_EQ(r.lags[2], 36u);
}

TEST(TopLags, ConstantSeriesIsDegenerate) {
  const LagResult r = top_lags(std::vector<double>(30, 0.0), 5);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.lags, (std::vector<std::size_t>{1, 2, 3, 4, 5}));
}

TEST(TopLags, TooShort) {
  EXPECT_THROW(top_lags(std::vector<double>(9, 1.0), 5), ConfigError);
}
