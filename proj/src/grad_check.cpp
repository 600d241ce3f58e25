#include "ckpl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ckpl/errors.hpp"

namespace ckpl {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  Tensor out = f();
  if (out.size() != 1) {
    throw DimensionError("grad_check: function returned shape " + shape_str(out.shape()));
  }
  const double v = out.item();
  if (!std::isfinite(v)) throw EvaluationError("grad_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double h, double tol) {
  if (!(h > 0.0)) throw ParameterError("grad_check: step must be positive");
  GradCheckReport report;
  report.tolerance = tol;

  for (auto& p : params) p.zero_grad();
  Tensor out = f();
  if (out.size() != 1) {
    throw DimensionError("grad_check: function returned shape " + shape_str(out.shape()));
  }
  if (!std::isfinite(out.item())) {
    throw EvaluationError("grad_check: function value is not finite");
  }
  backward(out);

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double plus = evaluate(f);
      values[i] = saved - h;
      const double minus = evaluate(f);
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double rel = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.entries_checked;
      if (rel > tol) report.offenders.push_back({pi, i, analytic[i], numeric, rel});
    }
  }
  for (auto& p : params) p.zero_grad();
  return report;
}

std::string format_report(const GradCheckReport& report) {
  std::ostringstream os;
  os << "grad-check: " << (report.passed() ? "PASS" : "FAIL") << " entries=" << report.entries_checked
     << " max_rel_error=" << report.max_rel_error << " tol=" << report.tolerance;
  const std::size_t shown = std::min<std::size_t>(report.offenders.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& o = report.offenders[i];
    os << "\n  param " << o.param << " entry " << o.entry << ": analytic=" << o.analytic
       << " numeric=" << o.numeric << " rel=" << o.rel_error;
  }
  if (report.offenders.size() > shown) {
    os << "\n  ... " << report.offenders.size() - shown << " more";
  }
  return os.str();
}

}  // namespace ckpl
