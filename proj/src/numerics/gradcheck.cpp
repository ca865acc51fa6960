#include "relnov/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace relnov {
namespace {

double evaluate(const ScalarObjective& objective) {
  Tape<double> tape;
  const Var<double> loss = objective(tape);
  if (loss.value().size() != 1) throw ContractError("finite_diff_check: objective is not scalar");
  return loss.value()[0];
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarObjective& objective,
                                  const std::vector<NamedParam>& params, double rel_tol,
                                  double abs_floor) {
  std::vector<bool> previous;
  for (const auto& p : params) {
    previous.push_back(p.tensor->requires_grad());
    p.tensor->set_requires_grad(true);
    p.tensor->zero_grad();
  }
  {
    Tape<double> tape;
    const Var<double> loss = objective(tape);
    tape.backward(loss);
  }

  GradCheckReport report;
  for (const auto& p : params) {
    ParamGradError entry{p.name};
    auto values = p.tensor->data();
    const std::vector<double> analytic(p.tensor->grad().begin(), p.tensor->grad().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double w = values[i];
      const double h = 1e-5 * std::max(1.0, std::abs(w));
      values[i] = w + h;
      const double up = evaluate(objective);
      values[i] = w - h;
      const double down = evaluate(objective);
      values[i] = w;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite objective perturbing " + p.name + "[" +
                           std::to_string(i) + "]");
      }
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), abs_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (i == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.params.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].tensor->set_requires_grad(previous[i]);
  }
  report.passed = report.max_rel_error <= rel_tol;
  return report;
}

}  // namespace relnov
