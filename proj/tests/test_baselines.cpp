#include <gtest/gtest.h>

#include "helpers.hpp"
#include "tsrp/baselines.hpp"
#include "tsrp/error.hpp"

using namespace tsrp;

TEST(Persistence, RepeatsLastValue) {
  EXPECT_EQ(persistence(std::vector<double>{0.1, 0.4, 0.7}, 3), (std::vector<double>{0.7, 0.7, 0.7}));
  EXPECT_THROW(persistence(std::vector<double>{}, 3), ShapeError);
}

TEST(MovingAverage, EdgePadding) {
  const auto m = moving_average(std::vector<double>{1, 2, 3, 4, 10}, 3);
  const std::vector<double> want{4.0 / 3, 2, 3, 17.0 / 3, 8};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(m[i], want[i], 1e-14);
  EXPECT_EQ(moving_average(std::vector<double>{5, 5, 5}, 25), (std::vector<double>{5, 5, 5}));
  EXPECT_THROW(moving_average(std::vector<double>{1}, 4), ConfigError);
}

TEST(DLinear, ZeroInitAndDecomposition) {
  DLinearState s = DLinearState::init(6, 2, 3);
  EXPECT_EQ(dlinear_forward(std::vector<double>(6, 0.7), s), (std::vector<double>{0, 0}));
  // With both maps equal, trend + seasonal = x, so the output is W·x.
  for (std::size_t j = 0; j < 6; ++j) {
    s.w_trend.value(0, j) = s.w_seasonal.value(0, j) = static_cast<double>(j);
    s.w_trend.value(1, j) = s.w_seasonal.value(1, j) = 1.0;
  }
  const std::vector<double> x{1, 3, 2, 5, 4, 6};
  const auto y = dlinear_forward(x, s);
  EXPECT_NEAR(y[0], 0 * 1 + 1 * 3 + 2 * 2 + 3 * 5 + 4 * 4 + 5 * 6, 1e-12);
  EXPECT_NEAR(y[1], 21.0, 1e-12);
  EXPECT_THROW(dlinear_forward(std::vector<double>(5, 0.0), s), ShapeError);
}

TEST(DLinear, BeatsPersistenceOnFixture) {
  const PlantData d = testing_util::fixture_plant(20);
  const WindowSet train = d.train_windows(24, 12, 2), val = d.val_windows(24, 12, 4), test = d.test_windows(24, 12, 1);
  DLinearState s = DLinearState::init(24, 12);
  TrainConfig t;
  t.max_epochs = 30;
  t.lr = 3e-3;
  train_dlinear(s, train, &val, t);
  EXPECT_LT(evaluate_dlinear(s, test).metrics.mse, evaluate_persistence(test).metrics.mse);
}
