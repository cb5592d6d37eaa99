#include "tsrp/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tsrp/error.hpp"

namespace tsrp {

namespace {

double evaluate(const LossBuilder& loss) {
  Tape tape;
  Var l = loss(tape);
  if (l.rows() != 1 || l.cols() != 1) throw ShapeError("grad_check: loss must be 1x1");
  const double v = l.value()(0, 0);
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           const GradCheckOptions& opts) {
  if (!(opts.step >= 1e-6 && opts.step <= 1e-4)) {
    throw ConfigError(fmt::format("grad_check: step {} outside [1e-6, 1e-4]", opts.step));
  }
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var l = loss(tape);
    if (l.rows() != 1 || l.cols() != 1) throw ShapeError("grad_check: loss must be 1x1");
    if (!std::isfinite(l.value()(0, 0))) throw NumericError("grad_check: loss is not finite");
    tape.backward(l);
    for (Parameter* p : params) {
      if (!p->trainable) {
        analytic.emplace_back();
        continue;
      }
      analytic.push_back(tape.gradient(*p).value_or(Matrix(p->value.rows(), p->value.cols())));
    }
  }

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    if (!p.trainable) continue;
    GradCheckEntry entry{p.name, p.value.size(), 0.0, 0.0};
    auto values = p.value.data();
    auto grads = analytic[pi].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + opts.step;
      const double plus = evaluate(loss);
      values[i] = saved - opts.step;
      const double minus = evaluate(loss);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * opts.step);
      const double abs_err = std::abs(grads[i] - numeric);
      const double denom = std::max({std::abs(grads[i]), std::abs(numeric), opts.floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

}  // namespace tsrp
