#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsrp/matrix.hpp"
#include "tsrp/tape.hpp"

namespace tsrp {

struct PatchConfig {
  std::size_t patch_len = 16;
  std::size_t stride = 8;
  std::size_t d_model = 16;

  void validate(std::size_t input_len) const;
};

/// ⌊(L − m)/s⌋ + 1. Throws ConfigError when m > L or the stride is out of range.
std::size_t patch_count(std::size_t input_len, const PatchConfig& cfg);

/// k×m matrix; row i holds x[i·s, i·s + m). Trailing points past the last full
/// patch are dropped.
Matrix partition(std::span<const double> x, const PatchConfig& cfg);

/// e = S·W_eᵀ + b_e with W_e d_model×m and b_e 1×d_model.
Matrix embed_patches(const Matrix& patches, const Matrix& w_e, const Matrix& b_e);
Var embed_patches(Var patches, Var w_e, Var b_e);

struct WindowNormState {
  double mean = 0.0;
  double scale = 1.0;
};

inline constexpr double kStandardizeEps = 1e-8;

/// x' = (x − mean)/max(std, 1e-8) using the population standard deviation.
std::vector<double> window_standardize(std::span<const double> x, WindowNormState& state);
std::vector<double> window_destandardize(std::span<const double> x, const WindowNormState& state);

}  // namespace tsrp
