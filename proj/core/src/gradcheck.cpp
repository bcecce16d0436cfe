#include "vega/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "vega/error.hpp"

namespace vega::ad {

namespace {

double evaluate(const ScalarFn& fn) {
  Tape tape;
  const double v = fn(tape).value().item();
  if (!std::isfinite(v)) throw ValidationError("finite-difference check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport gradient_check(const ScalarFn& fn, std::span<Tensor* const> params, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ValidationError("finite-difference step must lie in [1e-7, 1e-3]");

  std::vector<bool> had_grad;
  std::vector<std::vector<double>> saved_grad;
  for (Tensor* p : params) {
    had_grad.push_back(p->requires_grad());
    saved_grad.emplace_back(p->grad().begin(), p->grad().end());
    p->set_requires_grad(true);
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Var loss = fn(tape);
    if (!std::isfinite(loss.value().item())) {
      throw ValidationError("finite-difference check: function value is not finite");
    }
    tape.backward(loss);
    for (Tensor* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());
  }

  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = *params[t];
    p.set_requires_grad(false);  // numeric passes need no backward closures
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      const double fp = evaluate(fn);
      p[i] = orig - h;
      const double fm = evaluate(fn);
      p[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[t][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.coordinates;
      if (rel > report.max_rel_error || report.worst.empty()) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        report.worst = std::to_string(t) + ":" + std::to_string(i);
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    p.set_requires_grad(true);
  }

  for (std::size_t t = 0; t < params.size(); ++t) {
    params[t]->set_requires_grad(had_grad[t]);
    if (had_grad[t]) std::copy(saved_grad[t].begin(), saved_grad[t].end(), params[t]->grad().begin());
  }
  return report;
}

double finite_difference_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& x, double h) {
  Tensor local = x.detached();
  Tensor* params[] = {&local};
  return gradient_check([&](Tape& tape) { return fn(tape, tape.param(local)); }, params, h).max_rel_error;
}

}  // namespace vega::ad
