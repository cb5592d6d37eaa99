#include <memory>
#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include "tsrp/dataio.hpp"
#include "tsrp/forecaster.hpp"
#include "tsrp/rng.hpp"
#include "tsrp/spectral.hpp"
#include "tsrp/trainer.hpp"

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  tsrp::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform();
  return v;
}

std::shared_ptr<const tsrp::Backbone> backbone() {
  static auto b = std::make_shared<const tsrp::Backbone>(tsrp::BackboneConfig{});
  return b;
}

void BM_Dft(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(tsrp::dft(x));
}
BENCHMARK(BM_Dft)->Arg(24)->Arg(48)->Arg(336)->Arg(512);

void BM_TopLags(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(tsrp::top_lags(x, 5));
}
BENCHMARK(BM_TopLags)->Arg(24)->Arg(336);

void BM_EncodePrompt(benchmark::State& state) {
  const auto b = backbone();
  const auto ids = tsrp::make_prompt(noise(24, 3), 12).token_ids;
  const tsrp::Matrix emb = b->embed_tokens(ids);
  for (auto _ : state) benchmark::DoNotOptimize(b->encode_prefix(emb));
}
BENCHMARK(BM_EncodePrompt)->Unit(benchmark::kMillisecond);

// Forecast of one window with its prompt prefix already cached.
void BM_PredictCached(benchmark::State& state) {
  tsrp::ForecasterConfig cfg;
  cfg.horizon = static_cast<std::size_t>(state.range(0));
  cfg.input_len = 2 * cfg.horizon;
  tsrp::ModelState s = tsrp::ModelState::init(cfg, backbone());
  tsrp::Forecaster f(s, nullptr);
  const auto x = noise(cfg.input_len, 4);
  f.predict(x);
  for (auto _ : state) benchmark::DoNotOptimize(f.predict(x));
}
BENCHMARK(BM_PredictCached)->Arg(12)->Arg(24)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const tsrp::PlantData d({"B", 8.0, 0, 0}, tsrp::synth_plant(1, 10, 8.0, 0.4), tsrp::chronological_split(2880));
  const tsrp::WindowSet w = d.train_windows(24, 12, 97);
  tsrp::ModelState s = tsrp::ModelState::init(tsrp::ForecasterConfig{}, backbone());
  tsrp::Forecaster f(s, nullptr);
  std::vector<std::size_t> batch(std::min<std::size_t>(16, w.size()));
  std::iota(batch.begin(), batch.end(), 0);
  tsrp::TrainConfig tc;
  tsrp::train_step(s, f, w, batch, tc, 0, 0);
  std::size_t step = 1;
  for (auto _ : state) benchmark::DoNotOptimize(tsrp::train_step(s, f, w, batch, tc, 0, step++));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
