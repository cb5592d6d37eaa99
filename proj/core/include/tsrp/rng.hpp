#pragma once

#include <array>
#include <cstdint>

namespace tsrp {

class Matrix;

/// SplitMix64 (Steele, Lea, Flood 2014). Used to expand a 64-bit seed into
/// xoshiro state and for cheap seed derivation.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}
  std::uint64_t next() noexcept;

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman and Vigna). All randomness in the library goes
/// through this generator so results depend only on the seed, never on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal via the Box-Muller transform (second variate cached).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Deterministic child seed for a named stream, so that adding a new consumer
/// does not shift the draws of existing ones.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

void fill_normal(Matrix& m, Rng& rng, double stddev);

}  // namespace tsrp
