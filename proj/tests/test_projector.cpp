#include <gtest/gtest.h>

#include "helpers.hpp"
#include "tsrp/error.hpp"
#include "tsrp/grad_check.hpp"
#include "tsrp/projector.hpp"

using namespace tsrp;

TEST(Projector, ParameterCount) {
  const ProjectionHead h = ProjectionHead::init(5, 16, 12, 0);
  EXPECT_EQ(h.scalar_count(), 972u);
  EXPECT_EQ(h.weight.value.rows(), 12u);
  EXPECT_EQ(h.weight.value.cols(), 80u);
}

TEST(Projector, UsesOnlyTheLastKRows) {
  ProjectionHead h = ProjectionHead::init(2, 4, 3, 1);
  Matrix out = testing_util::random_matrix(5, 4, 2);
  const auto y0 = project(out, h);
  out(0, 0) += 10.0;
  out(2, 3) -= 10.0;
  EXPECT_EQ(project(out, h), y0);

  // Hand flatten: forecast = W·vec(rows 3..4) + b.
  for (std::size_t i = 0; i < 3; ++i) {
    double acc = h.bias.value(0, i);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 4; ++c) acc += h.weight.value(i, r * 4 + c) * out(3 + r, c);
    EXPECT_NEAR(y0[i], acc, 1e-14);
  }
}

TEST(Projector, ShapeErrors) {
  ProjectionHead h = ProjectionHead::init(3, 4, 2, 0);
  EXPECT_THROW(project(Matrix(2, 4), h), ShapeError);
  EXPECT_THROW(project(Matrix(3, 5), h), ShapeError);
  EXPECT_THROW(ProjectionHead::init(0, 4, 2, 0), ConfigError);
}

TEST(Projector, Gradients) {
  ProjectionHead h = ProjectionHead::init(2, 4, 3, 5);
  const Matrix out = testing_util::random_matrix(4, 4, 6);
  const Matrix target = testing_util::random_matrix(1, 3, 7);
  auto loss = [&](Tape& t) { return ad::mse(project(t.constant(out), h, true), target); };
  const auto ps = h.parameters();
  EXPECT_TRUE(grad_check(loss, ps).passed);
}
