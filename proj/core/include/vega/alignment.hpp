#pragma once

#include "vega/alignment_params.hpp"
#include "vega/autodiff.hpp"
#include "vega/encoder.hpp"
#include "vega/model.hpp"

namespace vega {

struct AlignmentConfig {
  double lambda = 0.1;
  bool enabled = true;

  void validate() const;
};

ad::Var project(ad::Tape& tape, ProjectorParams& projector, ad::Var tokens);
Tensor project(const PatchTokenMap& tokens, const ProjectorParams& projector);

/// Mean per-token cosine distance (1/N) sum_i (1 - cos(projected_i, teacher_i)).
/// The teacher side must be a constant on the tape: no gradient reaches it.
ad::Var align_loss(ad::Var projected, ad::Var teacher);
double align_loss(const Tensor& projected, const Tensor& teacher);

// Mean squared error over action components.
ad::Var action_loss(ad::Var pred, ad::Var gt);
double action_loss(const Tensor& pred, const Tensor& gt);

/// l_action + lambda * l_align when enabled, l_action otherwise.
double vega_loss(double l_action, double l_align, const AlignmentConfig& cfg);
// On-tape form; `l_align` is ignored (and may be unbound) when alignment is disabled.
ad::Var vega_loss(ad::Var l_action, ad::Var l_align, const AlignmentConfig& cfg);

// Drops the projector; the action path is untouched.
PolicyModel strip_projector(const TrainedModel& model);

}  // namespace vega
