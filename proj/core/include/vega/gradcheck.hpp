#pragma once

#include <functional>
#include <span>
#include <string>

#include "vega/autodiff.hpp"

namespace vega::ad {

/// Builds a scalar on the given tape from tensors the caller has bound with tape.param().
using ScalarFn = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  // "<tensor index>:<flat coordinate>" of the worst coordinate.
  std::string worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares tape gradients with central differences for every coordinate of
/// every tensor in `params`. Relative error per coordinate is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// The tensors are perturbed in place and restored; their gradient state is
/// left as it was on entry.
GradCheckReport gradient_check(const ScalarFn& fn, std::span<Tensor* const> params, double h = 1e-5);

/// Single-input form: fn receives x bound on the tape.
double finite_difference_check(const std::function<Var(Tape&, Var)>& fn, const Tensor& x, double h = 1e-5);

}  // namespace vega::ad
