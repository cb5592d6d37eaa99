#include "tsrp/adam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

void adam_step(AdamState& state, Matrix& param, const Matrix& grad) {
  if (!param.same_shape(grad)) {
    throw ShapeError(fmt::format("adam_step: param {} grad {}", param.shape_string(),
                                 grad.shape_string()));
  }
  if (state.m.empty() && param.size() > 0) {
    state.m = Matrix(param.rows(), param.cols());
    state.v = Matrix(param.rows(), param.cols());
  }
  if (!state.m.same_shape(param)) {
    throw ShapeError(fmt::format("adam_step: state {} param {}", state.m.shape_string(),
                                 param.shape_string()));
  }
  const AdamConfig& c = state.config;
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  auto p = param.data();
  auto g = grad.data();
  auto m = state.m.data();
  auto v = state.v.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace tsrp
