#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "relnov/numerics/tape.hpp"

namespace relnov {

struct NamedParam {
  std::string name;
  Tensor<double>* tensor = nullptr;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Builds the scalar objective on a fresh tape from the current parameter values.
using ScalarObjective = std::function<Var<double>(Tape<double>&)>;

// Compares reverse-mode gradients against central differences with step
// h = 1e-5 * max(1, |w|). Relative error is |a - n| / max(|a|, |n|, abs_floor);
// abs_floor keeps gradients that are zero up to round-off from dominating.
GradCheckReport finite_diff_check(const ScalarObjective& objective,
                                  const std::vector<NamedParam>& params, double rel_tol,
                                  double abs_floor = 1e-6);

}  // namespace relnov
