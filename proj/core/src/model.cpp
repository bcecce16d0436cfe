#include "vega/model.hpp"

#include "vega/error.hpp"

namespace vega {

ad::Var student_tokens_on_tape(ad::Tape& tape, EncoderParams& encoder, ad::Var patches) {
  if (encoder.config.num_blocks < 2) throw ValidationError("student extraction needs at least 2 blocks");
  return encode_on_tape(tape, encoder, patches, student_depth(encoder.config)).back();
}

Tensor predict_batch(const PolicyModel& model, std::span<const Tensor* const> images) {
  auto& m = const_cast<PolicyModel&>(model);  // bound read-only on a no-grad tape
  ad::Tape tape(false);
  ad::Var patches = tape.constant(patchify_batch(images, model.encoder.config));
  ad::Var tokens = student_tokens_on_tape(tape, m.encoder, patches);
  return action_head_forward(tape, m.head, tokens, model.encoder.config.num_tokens()).value().detached();
}

Action predict(const PolicyModel& model, const Tensor& image) {
  const Tensor* one[] = {&image};
  const Tensor out = predict_batch(model, one);
  return Action(out.values().begin(), out.values().end());
}

Action predict(const TrainedModel& model, const Tensor& image) { return predict(model.policy, image); }

}  // namespace vega
