#include <numeric>

#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "tsrp/error.hpp"
#include "tsrp/grad_check.hpp"
#include "tsrp/reprogrammer.hpp"

using namespace tsrp;
using testing_util::random_matrix;

namespace {

oracle::Mat to_rows(const Matrix& m) {
  oracle::Mat out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r].assign(m.row(r).begin(), m.row(r).end());
  return out;
}

constexpr std::size_t kDModel = 16, kVocab = 256, kDllm = 32;

}  // namespace

TEST(Reprogram, MatchesStraightLineOracle) {
  ReprogramConfig cfg;
  Reprogrammer rep = Reprogrammer::init(cfg, kDModel, kVocab, kDllm, 5);
  const Matrix vocab = random_matrix(kVocab, kDllm, 6, 0.02);
  const Matrix e = random_matrix(3, kDModel, 7);
  const Matrix got = reprogram(e, rep, vocab);
  const oracle::Mat want = oracle::reprogram(to_rows(e), to_rows(rep.mapping.value), to_rows(vocab), to_rows(rep.w_q.value),
                                             to_rows(rep.w_k.value), to_rows(rep.w_v.value), to_rows(rep.w_o.value),
                                             cfg.heads);
  ASSERT_EQ(got.rows(), 3u);
  ASSERT_EQ(got.cols(), kDllm);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < kDllm; ++j) EXPECT_NEAR(got(i, j), want[i][j], 1e-12);
}

TEST(Reprogram, AttentionRowsSumToOne) {
  Reprogrammer rep = Reprogrammer::init({4, 8, 32}, kDModel, kVocab, kDllm, 1);
  const Matrix vocab = random_matrix(kVocab, kDllm, 2, 0.5);
  const auto heads = reprogram_attention(random_matrix(5, kDModel, 3, 3.0), rep, vocab);
  ASSERT_EQ(heads.size(), 4u);
  for (const Matrix& a : heads) {
    ASSERT_EQ(a.rows(), 5u);
    ASSERT_EQ(a.cols(), 32u);
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const auto row = a.row(r);
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
    }
  }
}

TEST(Reprogram, PrototypePermutationInvariance) {
  Reprogrammer rep = Reprogrammer::init({2, 8, 12}, kDModel, kVocab, kDllm, 4);
  const Matrix vocab = random_matrix(kVocab, kDllm, 5, 0.1);
  const Matrix e = random_matrix(4, kDModel, 6);
  const Matrix before = reprogram(e, rep, vocab);
  Matrix permuted(rep.mapping.value.rows(), rep.mapping.value.cols());
  for (std::size_t r = 0; r < permuted.rows(); ++r) {
    const auto src = rep.mapping.value.row((r * 5 + 3) % permuted.rows());
    std::copy(src.begin(), src.end(), permuted.row(r).begin());
  }
  rep.mapping.value = permuted;
  EXPECT_LT(max_abs_diff(reprogram(e, rep, vocab), before), 1e-9);
}

TEST(Reprogram, SinglePrototypeIgnoresQuery) {
  // With one key the softmax weight is exactly 1, so every row equals W_o·v.
  Reprogrammer rep = Reprogrammer::init({4, 8, 1}, kDModel, kVocab, kDllm, 8);
  const Matrix out = reprogram(random_matrix(6, kDModel, 9, 5.0), rep, random_matrix(kVocab, kDllm, 10));
  for (std::size_t r = 1; r < out.rows(); ++r)
    for (std::size_t j = 0; j < out.cols(); ++j) EXPECT_EQ(out(r, j), out(0, j));
}

TEST(Reprogram, ConfigAndShapeErrors) {
  EXPECT_THROW(Reprogrammer::init({4, 8, 0}, kDModel, kVocab, kDllm, 0), ConfigError);
  EXPECT_THROW(build_prototypes(Matrix(256, 32), Matrix(4, 100)), ShapeError);
  EXPECT_EQ(build_prototypes(Matrix(256, 32, 1.0), Matrix(4, 256, 0.5)).rows(), 4u);
  EXPECT_THROW(assemble_input(Matrix(3, 32), Matrix(2, 16)), ShapeError);
  const Matrix a = assemble_input(Matrix(3, 4, 1.0), Matrix(2, 4, 2.0));
  EXPECT_EQ(a.rows(), 5u);
  EXPECT_EQ(a(4, 0), 2.0);
  EXPECT_EQ(assemble_input(Matrix(0, 4), Matrix(2, 4, 2.0)), Matrix(2, 4, 2.0));
}

TEST(Reprogram, ScalarCount) {
  Reprogrammer rep = Reprogrammer::init({4, 8, 32}, kDModel, kVocab, kDllm, 0);
  EXPECT_EQ(rep.scalar_count(), 32u * 256 + 32 * 16 + 2 * 32 * 32 + 32 * 32);
}

TEST(Reprogram, GradientsMatchFiniteDifferences) {
  Reprogrammer rep = Reprogrammer::init({2, 4, 6}, 8, kVocab, kDllm, 3);
  const Matrix vocab = random_matrix(kVocab, kDllm, 4, 0.3);
  const Matrix e = random_matrix(3, 8, 5);
  const Matrix target = random_matrix(3, kDllm, 6);
  auto loss = [&](Tape& t) {
    const PrototypeKV kv = prototype_kv(t, rep, vocab, true);
    return ad::mse(reprogram(t.constant(e), kv, rep, true), target);
  };
  const auto params = rep.parameters();
  const GradCheckReport r = grad_check(loss, params);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}
