#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace tsrp {

double mae(std::span<const double> y, std::span<const double> yhat);
double mse(std::span<const double> y, std::span<const double> yhat);

struct R2 {
  double raw = 0.0;
  /// max(0, raw)
  double reported = 0.0;
};

/// 1 − SS_res/SS_tot. Needs N ≥ 2 and non-constant y (DegenerateError otherwise).
R2 r2(std::span<const double> y, std::span<const double> yhat);

/// (200/N)·Σ|y − ŷ|/(|y| + |ŷ|); a term with |y| + |ŷ| = 0 contributes 0.
double smape(std::span<const double> y, std::span<const double> yhat);

struct MetricsReport {
  double mae = 0.0;
  double mse = 0.0;
  double r2_raw = 0.0;
  double r2_reported = 0.0;
  double smape = 0.0;
  std::size_t n = 0;
};

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat);

/// Shortest decimal form that parses back to the same double.
std::string format_metric(double v);

}  // namespace tsrp
