#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "refatom/core/param_store.hpp"

namespace refatom {

/// Result of one objective evaluation. `selections` fingerprints every hard
/// (non-differentiable) choice taken; a finite-difference probe is only
/// meaningful when it leaves the fingerprint unchanged.
struct Evaluation {
  double loss = 0.0;
  std::vector<std::size_t> selections;
};

/// Evaluates the objective; when `with_grad` is set, gradients are added
/// into `params` grads (which the caller zeroes).
using Objective = std::function<Evaluation(ParamStore& params, bool with_grad)>;

struct GradCheckOptions {
  double eps = 1e-5;
};

struct ParamGradCheck {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes that flipped a hard selection
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool non_finite = false;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::vector<ParamGradCheck> params;
  bool aborted = false;
  std::string abort_reason;

  bool passed(double tolerance) const { return !aborted && max_rel_err <= tolerance; }
};

/// |a - n| / max(1, |a|, |n|).
double gradient_rel_err(double analytic, double numeric);

/// Compares reverse-mode gradients against central differences
/// (f(t + eps) - f(t - eps)) / 2 eps for every scalar of every parameter.
GradCheckReport grad_check(const Objective& objective, ParamStore params,
                           const GradCheckOptions& options = {});

}  // namespace refatom
