#include <gtest/gtest.h>

#include "helpers.hpp"
#include "tsrp/error.hpp"
#include "tsrp/forecaster.hpp"
#include "tsrp/grad_check.hpp"

using namespace tsrp;

namespace {

/// Forecast assembled from the individual modules with a full (uncached)
/// backbone pass over [prompt; e'].
std::vector<double> composed_forecast(ModelState& s, std::span<const double> x) {
  const ForecasterConfig& c = s.config;
  std::vector<double> input(x.begin(), x.end());
  WindowNormState norm;
  if (c.standardize) input = window_standardize(x, norm);
  const Matrix e = embed_patches(partition(input, c.patch), s.w_e.value, s.b_e.value);
  const Matrix aligned = reprogram(e, s.reprogrammer, s.backbone->vocab_embeddings());
  Matrix prompt(0, aligned.cols());
  if (c.use_prompt) prompt = s.backbone->embed_tokens(make_prompt(x, c.horizon, c.dataset_context).token_ids);
  const Matrix out = s.backbone->forward(assemble_input(prompt, aligned));
  std::vector<double> y = project(out, s.head);
  if (c.standardize) y = window_destandardize(y, norm);
  return y;
}

ForecasterConfig config(std::size_t horizon, bool standardize, bool use_prompt) {
  ForecasterConfig c;
  c.horizon = horizon;
  c.input_len = 2 * horizon;
  c.standardize = standardize;
  c.use_prompt = use_prompt;
  c.seed = horizon;
  return c;
}

}  // namespace

class ForecastComposition : public ::testing::TestWithParam<std::tuple<std::size_t, bool, bool>> {};

TEST_P(ForecastComposition, MatchesModuleChain) {
  const auto [h, standardize, use_prompt] = GetParam();
  ModelState s = ModelState::init(config(h, standardize, use_prompt), testing_util::small_backbone());
  Forecaster f(s, nullptr);
  for (std::uint64_t w = 0; w < 3; ++w) {
    const auto x = testing_util::pv_window(2 * h, w);
    const auto got = f.predict(x);
    const auto want = composed_forecast(s, x);
    ASSERT_EQ(got.size(), h);
    for (std::size_t i = 0; i < h; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Configs, ForecastComposition,
                         ::testing::Values(std::make_tuple(12u, false, true), std::make_tuple(12u, true, true),
                                           std::make_tuple(24u, false, false), std::make_tuple(24u, true, true)));

TEST(Forecaster, ParameterCensus) {
  for (const auto& [h, d, heads, protos] : {std::make_tuple(12u, 16u, 4u, 32u), std::make_tuple(24u, 8u, 2u, 10u)}) {
    ForecasterConfig c = config(h, false, true);
    c.patch.d_model = d;
    c.reprogram.heads = heads;
    c.reprogram.prototypes = protos;
    const ModelState s = ModelState::init(c, testing_util::small_backbone());
    const std::size_t k = c.patch_count(), m = 16, inner = heads * 8, dl = 32;
    const std::size_t hand = d * m + d + protos * 256 + inner * d + 2 * inner * dl + dl * inner + h * k * dl + h;
    EXPECT_EQ(s.trainable_count(), hand);
    EXPECT_EQ(analytic_trainable_count(c, BackboneConfig{}), hand);
    std::size_t by_module = 0;
    for (const auto& [name, ps] : s.modules())
      for (const Parameter* p : ps) by_module += p->value.size();
    EXPECT_EQ(by_module, hand);
  }
}

TEST(Forecaster, CacheMatchesFullForwardBitwise) {
  ModelState s = ModelState::init(config(12, false, true), testing_util::small_backbone());
  auto cache = std::make_shared<PrefixCache>(s.backbone);
  Forecaster cached(s, cache);
  // Different windows share long prompt prefixes with the first one (the trunk).
  std::vector<std::vector<double>> xs;
  for (std::uint64_t w = 0; w < 5; ++w) xs.push_back(testing_util::pv_window(24, 10 + w));
  std::vector<std::vector<double>> first;
  for (const auto& x : xs) first.push_back(cached.predict(x));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    EXPECT_EQ(cached.predict(xs[i]), first[i]);
    const auto full = composed_forecast(s, xs[i]);
    for (std::size_t j = 0; j < full.size(); ++j) EXPECT_NEAR(first[i][j], full[j], 1e-12);
  }
  EXPECT_EQ(cache->misses(), 5u);
  EXPECT_EQ(cache->hits(), 5u);
  EXPECT_GT(cache->bytes(), 0u);

  // A budget of zero still returns correct prefixes, it just stores nothing past the trunk.
  Forecaster tiny(s, std::make_shared<PrefixCache>(s.backbone, 0));
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(tiny.predict(xs[i]), first[i]);
}

TEST(Forecaster, PromptTooLongForBackbone) {
  BackboneConfig bc;
  bc.max_seq = 64;
  ModelState s = ModelState::init(config(12, false, true), std::make_shared<const Backbone>(bc));
  Forecaster f(s, nullptr);
  EXPECT_THROW(f.predict(testing_util::pv_window(24, 0)), ConfigError);
  EXPECT_THROW(f.predict(testing_util::pv_window(20, 0)), ShapeError);
}

TEST(Forecaster, EndToEndGradients) {
  ForecasterConfig c = config(12, true, true);
  ModelState s = ModelState::init(c, testing_util::small_backbone());
  Forecaster f(s, nullptr);
  const auto x0 = testing_util::pv_window(24, 1), x1 = testing_util::pv_window(24, 2);
  const Matrix t0(1, 12, 0.3), t1(1, 12, -0.2);
  auto loss = [&](Tape& t) {
    const PrototypeKV kv = f.prototypes(t, true);
    Var parts[] = {ad::mse(f.forward(t, kv, x0, true).forecast, t0), ad::mse(f.forward(t, kv, x1, true).forecast, t1)};
    return ad::mean(parts);
  };
  // Skip the wide vocabulary mapping here; the acceptance run covers every scalar.
  std::vector<Parameter*> ps;
  for (Parameter* p : s.trainable())
    if (p != &s.reprogrammer.mapping) ps.push_back(p);
  const GradCheckReport r = grad_check(loss, ps);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(Forecaster, TrainableHashTracksChanges) {
  ModelState s = ModelState::init(config(12, false, true), testing_util::small_backbone());
  const std::string h = s.trainable_hash();
  EXPECT_EQ(ModelState::init(config(12, false, true), testing_util::small_backbone()).trainable_hash(), h);
  s.head.bias.value(0, 0) += 1e-9;
  EXPECT_NE(s.trainable_hash(), h);
}
