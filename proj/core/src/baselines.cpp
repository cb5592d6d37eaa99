#include "tsrp/baselines.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "tsrp/adam.hpp"
#include "tsrp/error.hpp"
#include "tsrp/rng.hpp"

namespace tsrp {

std::vector<double> persistence(std::span<const double> x, std::size_t horizon) {
  if (x.empty()) throw ShapeError("persistence needs at least one observation");
  return std::vector<double>(horizon, x.back());
}

std::vector<double> moving_average(std::span<const double> x, std::size_t kernel) {
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError(fmt::format("moving-average kernel {} must be odd", kernel));
  if (x.empty()) return {};
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  std::vector<double> out(x.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::ptrdiff_t j = i - half; j <= i + half; ++j) s += x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, n - 1))];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(kernel);
  }
  return out;
}

DLinearState DLinearState::init(std::size_t input_len, std::size_t horizon, std::size_t kernel) {
  if (input_len == 0 || horizon == 0) throw ConfigError("DLinear sizes must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError(fmt::format("moving-average kernel {} must be odd", kernel));
  DLinearState s;
  s.kernel = kernel;
  s.w_trend = {"dlinear.w_trend", Matrix(horizon, input_len), true};
  s.w_seasonal = {"dlinear.w_seasonal", Matrix(horizon, input_len), true};
  return s;
}

namespace {

void decompose(std::span<const double> x, std::size_t kernel, std::span<double> trend, std::span<double> seasonal) {
  const std::vector<double> t = moving_average(x, kernel);
  for (std::size_t i = 0; i < x.size(); ++i) {
    trend[i] = t[i];
    seasonal[i] = x[i] - t[i];
  }
}

void check_input(std::span<const double> x, const DLinearState& s) {
  if (x.size() != s.input_len())
    throw ShapeError(fmt::format("DLinear expects {} inputs, got {}", s.input_len(), x.size()));
}

}  // namespace

std::vector<double> dlinear_forward(std::span<const double> x, const DLinearState& s) {
  check_input(x, s);
  const std::size_t l = s.input_len();
  std::vector<double> trend(l), seasonal(l);
  decompose(x, s.kernel, trend, seasonal);
  std::vector<double> y(s.horizon(), 0.0);
  for (std::size_t h = 0; h < y.size(); ++h) {
    double acc = 0.0;
    for (std::size_t j = 0; j < l; ++j) acc += s.w_trend.value(h, j) * trend[j] + s.w_seasonal.value(h, j) * seasonal[j];
    y[h] = acc;
  }
  return y;
}

namespace {

double window_loss(const DLinearState& s, const WindowSet& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) total += mse(w.target(i), dlinear_forward(w.input(i), s));
  return total / static_cast<double>(w.size());
}

}  // namespace

TrainHistory train_dlinear(DLinearState& state, const WindowSet& train_set, const WindowSet* val_set,
                           const TrainConfig& cfg) {
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (train_set.input_length() != state.input_len() || train_set.horizon() != state.horizon())
    throw ConfigError("DLinear window shape does not match its configuration");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t l = state.input_len();
  const std::size_t horizon = state.horizon();
  const bool use_val = val_set != nullptr && !val_set->empty();

  AdamState adam_t, adam_s;
  TrainHistory hist;
  double best = std::numeric_limits<double>::infinity();
  Matrix best_t = state.w_trend.value, best_s = state.w_seasonal.value;
  std::size_t bad = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
      Rng rng(derive_seed(cfg.seed, 2000 + epoch));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
    }
    double sum = 0.0;
    std::size_t batches = 0;
    bool budget_done = false;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const std::size_t n = end - b;
      Matrix trend(n, l), seasonal(n, l), target(n, horizon);
      for (std::size_t r = 0; r < n; ++r) {
        decompose(train_set.input(order[b + r]), state.kernel, trend.row(r), seasonal.row(r));
        const auto y = train_set.target(order[b + r]);
        std::copy(y.begin(), y.end(), target.row(r).begin());
      }
      Tape tape;
      Var pred = ad::add(ad::linear(tape.constant_ref(trend), tape.param(state.w_trend)),
                         ad::linear(tape.constant_ref(seasonal), tape.param(state.w_seasonal)));
      Var loss = ad::mse(pred, target);
      sum += loss.value()(0, 0);
      tape.backward(loss);
      adam_t.config.lr = adam_s.config.lr = cfg.lr;
      adam_step(adam_t, state.w_trend.value, *tape.gradient(state.w_trend));
      adam_step(adam_s, state.w_seasonal.value, *tape.gradient(state.w_seasonal));
      ++batches;
      ++hist.steps;
      if (cfg.max_steps != 0 && hist.steps >= cfg.max_steps) {
        budget_done = true;
        break;
      }
    }
    hist.train_loss.push_back(sum / static_cast<double>(batches));
    if (use_val) {
      const double v = window_loss(state, *val_set);
      hist.val_loss.push_back(v);
      if (v < best) {
        best = v;
        hist.best_epoch = epoch;
        bad = 0;
        best_t = state.w_trend.value;
        best_s = state.w_seasonal.value;
      } else {
        ++bad;
      }
    } else {
      hist.best_epoch = epoch;
    }
    if (budget_done) break;
    if (use_val && bad >= cfg.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  if (use_val) {
    state.w_trend.value = std::move(best_t);
    state.w_seasonal.value = std::move(best_s);
  }
  return hist;
}

namespace {

template <class F>
Evaluation evaluate_with(const WindowSet& windows, F&& forecast) {
  if (windows.empty()) throw ConfigError("evaluation window set is empty");
  Evaluation ev;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto y = windows.target(i);
    const std::vector<double> f = forecast(windows.input(i));
    ev.truth.insert(ev.truth.end(), y.begin(), y.end());
    ev.forecast.insert(ev.forecast.end(), f.begin(), f.end());
  }
  ev.metrics = compute_metrics(ev.truth, ev.forecast);
  return ev;
}

}  // namespace

Evaluation evaluate_persistence(const WindowSet& windows) {
  return evaluate_with(windows, [&](std::span<const double> x) { return persistence(x, windows.horizon()); });
}

Evaluation evaluate_dlinear(const DLinearState& state, const WindowSet& windows) {
  return evaluate_with(windows, [&](std::span<const double> x) { return dlinear_forward(x, state); });
}

}  // namespace tsrp
