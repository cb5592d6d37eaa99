#pragma once

#include <cstdint>

#include "tsrp/matrix.hpp"

namespace tsrp {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments for one parameter. `m` and `v` are sized on the first step.
struct AdamState {
  AdamConfig config;
  Matrix m;
  Matrix v;
  std::uint64_t t = 0;
};

/// Bias-corrected Adam update applied to `param` in place.
void adam_step(AdamState& state, Matrix& param, const Matrix& grad);

}  // namespace tsrp
