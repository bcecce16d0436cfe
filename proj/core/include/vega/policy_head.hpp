#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vega/autodiff.hpp"
#include "vega/encoder.hpp"

namespace vega {

// Target position (3 normalized scene coordinates) followed by a grasp scalar.
inline constexpr std::size_t kActionDim = 4;
using Action = std::vector<double>;

/// Action expert: mean-pool tokens, then d -> h -> A with a GELU hidden layer.
struct ActionHeadParams {
  Tensor w1, b1;  // [d x h], [h]
  Tensor w2, b2;  // [h x A], [A]

  std::size_t input_dim() const { return w1.dim(0); }
  std::size_t action_dim() const { return w2.dim(1); }
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t parameter_count() const;
  void set_trainable(bool trainable);
};

// Hidden width defaults to 2d.
ActionHeadParams init_action_head(std::size_t embed_dim, std::size_t action_dim, std::uint64_t seed,
                                  std::size_t hidden_dim = 0);

// tokens [(B*N) x d] -> actions [B x A].
ad::Var action_head_forward(ad::Tape& tape, ActionHeadParams& head, ad::Var tokens, std::size_t tokens_per_image);

Action predict_action(const PatchTokenMap& tokens, const ActionHeadParams& head);

/// True iff the position error is strictly below tau and the grasp value is on
/// the same side of 0.5 as the ground truth.
bool success_proxy(const Action& pred, const Action& gt, double tau);

}  // namespace vega
