#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tsrp/tape.hpp"

namespace tsrp {

struct GradCheckEntry {
  std::string name;
  std::size_t scalars = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // trainable parameters only
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  /// Relative error is |a − n| / max(|a|, |n|, floor); the floor keeps
  /// gradients that are zero up to rounding from dominating the report.
  double floor = 1e-7;
};

/// Compares reverse-mode gradients against central differences
/// (f(x+h) − f(x−h)) / 2h for every scalar of every trainable parameter.
GradCheckReport grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           const GradCheckOptions& opts = {});

}  // namespace tsrp
