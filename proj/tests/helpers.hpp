#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "tsrp/backbone.hpp"
#include "tsrp/dataio.hpp"
#include "tsrp/forecaster.hpp"
#include "tsrp/matrix.hpp"
#include "tsrp/rng.hpp"

namespace testing_util {

inline tsrp::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
  tsrp::Matrix m(r, c);
  tsrp::Rng rng(seed);
  tsrp::fill_normal(m, rng, scale);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  tsrp::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

/// Daylight-like window: a bell with a little seeded noise.
inline std::vector<double> pv_window(std::size_t n, std::uint64_t seed) {
  tsrp::Rng rng(seed);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    v[i] = std::max(0.0, 0.8 * std::sin(3.14159 * t) + 0.05 * rng.normal());
  }
  return v;
}

inline std::shared_ptr<const tsrp::Backbone> small_backbone(std::uint64_t seed = 0) {
  tsrp::BackboneConfig cfg;
  cfg.seed = seed;
  return std::make_shared<const tsrp::Backbone>(cfg);
}

/// 60-day fixture series wrapped with the default split.
inline tsrp::PlantData fixture_plant(std::size_t days = 20, std::uint64_t seed = 3, double cloud = 0.4) {
  tsrp::TimeSeries s = tsrp::synth_plant(seed, days, 8.0, cloud);
  const std::size_t n = s.size();
  return tsrp::PlantData({"T", 8.0, 0.0, 0.0}, std::move(s), tsrp::chronological_split(n));
}

}  // namespace testing_util
