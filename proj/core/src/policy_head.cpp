#include "vega/policy_head.hpp"

#include <cmath>

#include "vega/error.hpp"
#include "vega/rng.hpp"

namespace vega {

std::vector<std::pair<std::string, Tensor*>> ActionHeadParams::named() {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}

std::vector<std::pair<std::string, const Tensor*>> ActionHeadParams::named() const {
  return {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}

std::size_t ActionHeadParams::parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

void ActionHeadParams::set_trainable(bool trainable) {
  for (auto& [name, t] : named()) t->set_requires_grad(trainable);
}

ActionHeadParams init_action_head(std::size_t embed_dim, std::size_t action_dim, std::uint64_t seed,
                                  std::size_t hidden_dim) {
  if (embed_dim == 0 || action_dim == 0) throw ValidationError("action head: dimensions must be positive");
  const std::size_t h = hidden_dim ? hidden_dim : 2 * embed_dim;
  Rng rng(seed);
  ActionHeadParams p;
  p.w1 = Tensor({embed_dim, h});
  xavier_uniform(p.w1, rng);
  p.b1 = Tensor({h});
  p.w2 = Tensor({h, action_dim});
  xavier_uniform(p.w2, rng);
  p.b2 = Tensor({action_dim});
  p.set_trainable(true);
  return p;
}

ad::Var action_head_forward(ad::Tape& tape, ActionHeadParams& head, ad::Var tokens, std::size_t tokens_per_image) {
  using namespace ad;
  if (tokens.value().cols() != head.input_dim()) {
    throw ValidationError("action head expects token dim " + std::to_string(head.input_dim()) + ", got " +
                          std::to_string(tokens.value().cols()));
  }
  Var pooled = mean_pool(tokens, tokens_per_image);
  Var hidden = gelu(add_bias(matmul(pooled, tape.param(head.w1)), tape.param(head.b1)));
  return add_bias(matmul(hidden, tape.param(head.w2)), tape.param(head.b2));
}

Action predict_action(const PatchTokenMap& tokens, const ActionHeadParams& head) {
  ad::Tape tape(false);
  auto& h = const_cast<ActionHeadParams&>(head);
  ad::Var t = tape.constant(tokens.tokens.detached());
  ad::Var out = action_head_forward(tape, h, t, tokens.tokens.rows());
  return Action(out.value().values().begin(), out.value().values().end());
}

bool success_proxy(const Action& pred, const Action& gt, double tau) {
  if (!(tau > 0.0)) throw ValidationError("success_proxy: tau must be positive");
  if (pred.size() != kActionDim || gt.size() != kActionDim) {
    throw ValidationError("success_proxy: actions must have " + std::to_string(kActionDim) + " components");
  }
  double err2 = 0.0;
  for (std::size_t i = 0; i < 3; ++i) err2 += (pred[i] - gt[i]) * (pred[i] - gt[i]);
  const bool grasp_ok = (pred[3] >= 0.5) == (gt[3] >= 0.5);
  return std::sqrt(err2) < tau && grasp_ok;
}

}  // namespace vega
