#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace tsrp {

using Complex = std::complex<double>;

/// Discrete Fourier coefficients X(f) = Σ_q x_q·exp(−j2πfq/Q), f = 0..Q−1,
/// with 0-based q. Relative to a 1-based sum each bin differs by a
/// unit-magnitude phase factor only, so magnitudes are identical.
struct Spectrum {
  std::vector<Complex> coeffs;

  std::size_t size() const noexcept { return coeffs.size(); }
  std::vector<double> magnitudes() const;
};

/// In-place-style FFT of any length: iterative radix-2 for powers of two,
/// Bluestein's chirp-z reduction otherwise. `inverse` applies the 1/N factor.
std::vector<Complex> fft(std::span<const Complex> input, bool inverse = false);

Spectrum dft(std::span<const double> x);

/// Circular autocorrelation r(τ) = Σ_n x̃_n·x̃_{(n+τ) mod Q} of the mean-removed
/// series, computed as the inverse transform of |X̃(f)|².
std::vector<double> autocorrelation(std::span<const double> x);

struct LagResult {
  std::vector<std::size_t> lags;
  /// Zero-variance input; lags are then 1..k.
  bool degenerate = false;
};

/// Resolution used to rank autocorrelation values: r(τ)/r(0) is rounded to
/// this grid before sorting so mathematically equal values (e.g. r(τ) and
/// r(Q − τ)) tie and fall back to the smaller lag.
inline constexpr double kLagResolution = 1e-8;

/// The k lags in [1, Q−1] with the largest circular autocorrelation, ties
/// broken by the smaller lag. Requires Q ≥ 2k.
LagResult top_lags(std::span<const double> x, std::size_t k = 5);

/// Ranking rule shared with the brute-force check: sort lags 1..Q−1 by
/// quantized r(τ)/r(0) descending, then by lag ascending.
std::vector<std::size_t> rank_lags(std::span<const double> acf, std::size_t k);

}  // namespace tsrp
