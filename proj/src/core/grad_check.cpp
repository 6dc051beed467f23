#include "refatom/core/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace refatom {

double gradient_rel_err(double analytic, double numeric) {
  const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const Objective& objective, ParamStore params, const GradCheckOptions& options) {
  if (!(options.eps > 0.0)) throw ConfigError("grad_check: eps must be positive");
  GradCheckReport report;

  params.zero_grad();
  const Evaluation base = objective(params, true);
  if (!std::isfinite(base.loss)) {
    report.aborted = true;
    report.abort_reason = "non-finite loss at the unperturbed point";
    return report;
  }

  for (const std::string& name : params.names()) {
    ParamGradCheck pc;
    pc.name = name;
    Mat& value = params.value(name);
    const Mat analytic = params.grad(name);
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + options.eps;
      const Evaluation plus = objective(params, false);
      value.data()[i] = saved - options.eps;
      const Evaluation minus = objective(params, false);
      value.data()[i] = saved;

      if (!std::isfinite(plus.loss) || !std::isfinite(minus.loss)) {
        pc.non_finite = true;
        report.params.push_back(pc);
        report.aborted = true;
        report.abort_reason = "non-finite loss while perturbing '" + name + "'";
        return report;
      }
      if (plus.selections != base.selections || minus.selections != base.selections) {
        ++pc.skipped;
        continue;
      }
      const double numeric = (plus.loss - minus.loss) / (2.0 * options.eps);
      const double a = analytic.data()[i];
      pc.max_rel_err = std::max(pc.max_rel_err, gradient_rel_err(a, numeric));
      pc.max_abs_err = std::max(pc.max_abs_err, std::abs(a - numeric));
      ++pc.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, pc.max_rel_err);
    report.checked += pc.checked;
    report.skipped += pc.skipped;
    report.params.push_back(pc);
  }
  return report;
}

}  // namespace refatom
