#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vega {

struct GradSuiteEntry {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst;  // "<tensor index>:<coordinate>"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t resamples = 0;
};

// Seeds 0..19.
std::vector<std::uint64_t> gradient_suite_seeds();

// Instances with a nonzero analytic gradient coordinate below this are redrawn.
inline constexpr double kMinCheckedGradient = 5e-6;

/// Finite-difference check (central, step h) of every differentiable
/// primitive and of the full joint loss through a small encoder, projector
/// and action head, once per seed. Tensor-valued ops are reduced by a fixed
/// random weighting with magnitudes in [0.5, 1.5].
///
/// Relative error is meaningless where the true gradient is comparable to the
/// roundoff of the difference quotient (about 1e-11 at h=1e-5), so an
/// instance whose analytic gradient has a coordinate with
/// 0 < |g| < kMinCheckedGradient is redrawn from the same stream before the
/// check. Exact zeros are kept; they compare exactly.
std::vector<GradSuiteEntry> run_gradient_suite(const std::vector<std::uint64_t>& seeds, double h = 1e-5);

double worst_error(const std::vector<GradSuiteEntry>& entries);

}  // namespace vega
