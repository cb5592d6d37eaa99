#include "tsrp/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

namespace {

void check(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) throw ShapeError("metrics need at least one sample");
  if (y.size() != yhat.size())
    throw ShapeError(fmt::format("metrics: {} targets vs {} forecasts", y.size(), yhat.size()));
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

R2 r2(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  if (y.size() < 2) throw DegenerateError("R^2 needs at least 2 samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw DegenerateError("R^2 undefined for constant targets");
  R2 r;
  r.raw = 1.0 - ss_res / ss_tot;
  r.reported = std::max(0.0, r.raw);
  return r;
}

double smape(std::span<const double> y, std::span<const double> yhat) {
  check(y, yhat);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double denom = std::abs(y[i]) + std::abs(yhat[i]);
    if (denom > 0.0) s += std::abs(y[i] - yhat[i]) / denom;
  }
  return 200.0 * s / static_cast<double>(y.size());
}

MetricsReport compute_metrics(std::span<const double> y, std::span<const double> yhat) {
  MetricsReport m;
  m.mae = mae(y, yhat);
  m.mse = mse(y, yhat);
  const R2 r = r2(y, yhat);
  m.r2_raw = r.raw;
  m.r2_reported = r.reported;
  m.smape = smape(y, yhat);
  m.n = y.size();
  return m;
}

std::string format_metric(double v) { return fmt::format("{}", v); }

}  // namespace tsrp
