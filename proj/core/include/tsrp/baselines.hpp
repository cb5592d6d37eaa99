#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsrp/dataio.hpp"
#include "tsrp/tape.hpp"
#include "tsrp/trainer.hpp"

namespace tsrp {

/// Last observed value repeated H times.
std::vector<double> persistence(std::span<const double> x, std::size_t horizon);

/// Centered moving average with edge padding (first/last value repeated).
std::vector<double> moving_average(std::span<const double> x, std::size_t kernel);

struct DLinearState {
  std::size_t kernel = 25;
  Parameter w_trend;     // H×L
  Parameter w_seasonal;  // H×L

  /// Both maps start at zero.
  static DLinearState init(std::size_t input_len, std::size_t horizon, std::size_t kernel = 25);
  std::size_t input_len() const { return w_trend.value.cols(); }
  std::size_t horizon() const { return w_trend.value.rows(); }
};

/// W_t·trend + W_s·(x − trend).
std::vector<double> dlinear_forward(std::span<const double> x, const DLinearState& state);

/// Same stopping rule and optimizer as the main trainer.
TrainHistory train_dlinear(DLinearState& state, const WindowSet& train_set, const WindowSet* val_set,
                           const TrainConfig& cfg);

Evaluation evaluate_persistence(const WindowSet& windows);
Evaluation evaluate_dlinear(const DLinearState& state, const WindowSet& windows);

}  // namespace tsrp
