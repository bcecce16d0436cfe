#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vega/tensor.hpp"

namespace vega {

/// phi(F) = W2 * GELU(W1 * LayerNorm(F) + b1) + b2, applied per token.
/// Weights are stored [in x out] like the encoder's.
struct ProjectorParams {
  Tensor ln_gain, ln_bias;
  Tensor w1, b1;
  Tensor w2, b2;

  std::size_t dim() const { return w1.dim(0); }
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t parameter_count() const;
  void set_trainable(bool trainable);
};

// 2d^2 weights + 2d linear biases + 2d LayerNorm affine.
std::size_t projector_parameter_count(std::size_t dim);

// Xavier-uniform weights, zero biases, unit LayerNorm gain.
ProjectorParams init_projector(std::size_t dim, std::uint64_t seed);

}  // namespace vega
