#include "tsrp/patcher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

void PatchConfig::validate(std::size_t input_len) const {
  if (patch_len == 0) throw ConfigError("patch length must be positive");
  if (stride == 0 || stride > patch_len)
    throw ConfigError(fmt::format("patch stride {} outside [1, {}]", stride, patch_len));
  if (d_model == 0) throw ConfigError("d_model must be positive");
  if (patch_len > input_len)
    throw ConfigError(fmt::format("patch length {} exceeds input length {}", patch_len, input_len));
}

std::size_t patch_count(std::size_t input_len, const PatchConfig& cfg) {
  cfg.validate(input_len);
  return (input_len - cfg.patch_len) / cfg.stride + 1;
}

Matrix partition(std::span<const double> x, const PatchConfig& cfg) {
  const std::size_t k = patch_count(x.size(), cfg);
  Matrix s(k, cfg.patch_len);
  for (std::size_t i = 0; i < k; ++i) {
    auto src = x.subspan(i * cfg.stride, cfg.patch_len);
    std::copy(src.begin(), src.end(), s.row(i).begin());
  }
  return s;
}

Matrix embed_patches(const Matrix& patches, const Matrix& w_e, const Matrix& b_e) {
  if (w_e.cols() != patches.cols() || b_e.rows() != 1 || b_e.cols() != w_e.rows())
    throw ShapeError(fmt::format("embed_patches: patches {}, W_e {}, b_e {}", patches.shape_string(),
                                 w_e.shape_string(), b_e.shape_string()));
  Matrix e = matmul_nt(patches, w_e);
  for (std::size_t i = 0; i < e.rows(); ++i)
    for (std::size_t j = 0; j < e.cols(); ++j) e(i, j) += b_e(0, j);
  return e;
}

Var embed_patches(Var patches, Var w_e, Var b_e) { return ad::linear(patches, w_e, b_e); }

std::vector<double> window_standardize(std::span<const double> x, WindowNormState& state) {
  if (x.size() < 2) throw ConfigError("window standardization needs at least 2 points");
  const double n = static_cast<double>(x.size());
  state.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - state.mean) * (v - state.mean);
  state.scale = std::max(std::sqrt(ss / n), kStandardizeEps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - state.mean) / state.scale;
  return out;
}

std::vector<double> window_destandardize(std::span<const double> x, const WindowNormState& state) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * state.scale + state.mean;
  return out;
}

}  // namespace tsrp
