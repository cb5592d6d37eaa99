#include "tsrp/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

namespace {

void fft_pow2(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    std::vector<Complex> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      twiddle[k] = std::polar(1.0, sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                                       static_cast<double>(len));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + half] * twiddle[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Forward transform of arbitrary length via the chirp-z identity
// nk = (n² + k² − (k − n)²)/2.
std::vector<Complex> bluestein(std::span<const Complex> x) {
  const std::size_t n = x.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  std::vector<Complex> chirp(n);
  for (std::size_t i = 0; i < n; ++i) {
    // i² mod 2n keeps the angle argument small and exact.
    const std::size_t sq = (i * i) % (2 * n);
    chirp[i] = std::polar(1.0, -std::numbers::pi * static_cast<double>(sq) / static_cast<double>(n));
  }
  std::vector<Complex> a(m), b(m);
  for (std::size_t i = 0; i < n; ++i) a[i] = x[i] * chirp[i];
  b[0] = std::conj(chirp[0]);
  for (std::size_t i = 1; i < n; ++i) b[i] = b[m - i] = std::conj(chirp[i]);
  fft_pow2(a, false);
  fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_pow2(a, true);
  std::vector<Complex> out(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * inv_m * chirp[i];
  return out;
}

}  // namespace

std::vector<double> Spectrum::magnitudes() const {
  std::vector<double> out(coeffs.size());
  std::transform(coeffs.begin(), coeffs.end(), out.begin(), [](Complex c) { return std::abs(c); });
  return out;
}

std::vector<Complex> fft(std::span<const Complex> input, bool inverse) {
  const std::size_t n = input.size();
  if (n == 0) throw ShapeError("fft of an empty input");
  std::vector<Complex> out;
  if (std::has_single_bit(n)) {
    out.assign(input.begin(), input.end());
    fft_pow2(out, inverse);
  } else if (!inverse) {
    out = bluestein(input);
  } else {
    // ifft(x) = conj(fft(conj(x))) / n
    std::vector<Complex> conj_in(n);
    std::transform(input.begin(), input.end(), conj_in.begin(), [](Complex c) { return std::conj(c); });
    out = bluestein(conj_in);
    for (auto& c : out) c = std::conj(c);
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& c : out) c *= inv_n;
  }
  return out;
}

Spectrum dft(std::span<const double> x) {
  if (x.empty()) throw ShapeError("dft of an empty series");
  std::vector<Complex> in(x.begin(), x.end());
  return Spectrum{fft(in)};
}

std::vector<double> autocorrelation(std::span<const double> x) {
  if (x.empty()) throw ShapeError("autocorrelation of an empty series");
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  std::vector<Complex> centered(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) centered[i] = x[i] - mean;
  auto spec = fft(centered);
  for (auto& c : spec) c = std::norm(c);
  auto back = fft(spec, true);
  std::vector<double> acf(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) acf[i] = back[i].real();
  return acf;
}

std::vector<std::size_t> rank_lags(std::span<const double> acf, std::size_t k) {
  const std::size_t q = acf.size();
  std::vector<std::size_t> lags(q - 1);
  std::iota(lags.begin(), lags.end(), 1);
  std::vector<long long> key(q, 0);
  for (std::size_t t = 1; t < q; ++t) key[t] = std::llround(acf[t] / acf[0] / kLagResolution);
  std::stable_sort(lags.begin(), lags.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
  lags.resize(std::min(k, lags.size()));
  return lags;
}

LagResult top_lags(std::span<const double> x, std::size_t k) {
  if (k == 0 || x.size() < 2 * k) {
    throw ConfigError(fmt::format("top_lags: need Q >= 2k, got Q = {}, k = {}", x.size(), k));
  }
  LagResult result;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const auto acf = (*lo == *hi) ? std::vector<double>{} : autocorrelation(x);
  if (acf.empty() || !(acf[0] > 0.0)) {
    result.degenerate = true;
    result.lags.resize(k);
    std::iota(result.lags.begin(), result.lags.end(), 1);
    return result;
  }
  result.lags = rank_lags(acf, k);
  return result;
}

}  // namespace tsrp
