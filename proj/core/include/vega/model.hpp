#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vega/alignment_params.hpp"
#include "vega/encoder.hpp"
#include "vega/policy_head.hpp"

namespace vega {

/// What runs at inference: the student encoder and the action head.
struct PolicyModel {
  EncoderParams encoder;
  ActionHeadParams head;

  std::size_t parameter_count() const { return encoder.parameter_count() + head.parameter_count(); }
};

/// Training-time bundle. The projector only ever reads student tokens; it
/// never feeds the action path.
struct TrainedModel {
  PolicyModel policy;
  std::optional<ProjectorParams> projector;

  std::size_t parameter_count() const;
};

// Student tokens at block L-2 for row-stacked patches, on a tape.
ad::Var student_tokens_on_tape(ad::Tape& tape, EncoderParams& encoder, ad::Var patches);

// [B x A] predictions for a batch of images, evaluated without gradients.
Tensor predict_batch(const PolicyModel& model, std::span<const Tensor* const> images);
Action predict(const PolicyModel& model, const Tensor& image);
Action predict(const TrainedModel& model, const Tensor& image);

}  // namespace vega
