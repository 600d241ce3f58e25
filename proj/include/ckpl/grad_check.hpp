#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ckpl/tensor.hpp"

namespace ckpl {

struct GradCheckOffender {
  std::size_t param = 0;  // index into the params list
  std::size_t entry = 0;  // flat index within that parameter
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t entries_checked = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::vector<GradCheckOffender> offenders;
  bool passed() const { return offenders.empty(); }
};

// Compares the reverse-mode gradient of a scalar function against central
// differences (f(x+h) - f(x-h)) / 2h for every entry of every parameter.
// The relative error of an entry is |analytic - numeric| / max(1, |numeric|).
// `f` must rebuild its graph from the current parameter values on each call.
// Throws EvaluationError if f ever returns a non-finite value.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           double h = 1e-5, double tol = 1e-6);

std::string format_report(const GradCheckReport& report);

}  // namespace ckpl
