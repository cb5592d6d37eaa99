#include "tsrp/projector.hpp"

#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

ProjectionHead ProjectionHead::init(std::size_t patches, std::size_t d_llm, std::size_t horizon,
                                    std::uint64_t seed) {
  if (patches == 0 || d_llm == 0 || horizon == 0) throw ConfigError("projection head sizes must be positive");
  ProjectionHead head;
  head.patches = patches;
  head.horizon = horizon;
  head.weight = {"projector.w_p", Matrix(horizon, patches * d_llm), true};
  head.bias = {"projector.b_p", Matrix(1, horizon), true};
  Rng rng(seed);
  fill_normal(head.weight.value, rng, 1.0 / std::sqrt(static_cast<double>(patches * d_llm)));
  return head;
}

Var project(Var output, ProjectionHead& head, bool trainable) {
  const std::size_t k = head.patches;
  if (output.rows() < k)
    throw ShapeError(fmt::format("projector expects at least {} rows, got {}", k, output.rows()));
  if (output.cols() * k != head.weight.value.cols())
    throw ShapeError(fmt::format("projector: {} patch rows of width {} do not match W_p {}", k,
                                 output.cols(), head.weight.value.shape_string()));
  Tape& t = *output.tape();
  Var rows = output.rows() == k ? output : ad::slice_rows(output, output.rows() - k, k);
  Var w = trainable ? t.param(head.weight) : t.constant_ref(head.weight.value);
  Var b = trainable ? t.param(head.bias) : t.constant_ref(head.bias.value);
  return ad::linear(ad::flatten(rows), w, b);
}

std::vector<double> project(const Matrix& output, ProjectionHead& head) {
  Tape t;
  return project(t.constant_ref(output), head, false).value().values();
}

}  // namespace tsrp
