#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vega/tensor.hpp"

namespace vega {

using NamedTensors = std::vector<std::pair<std::string, Tensor*>>;

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction and no weight decay. Parameters that do not
/// require grad are skipped but keep their (zero) moment slots so the state
/// layout depends only on the parameter list.
class Adam {
 public:
  explicit Adam(NamedTensors params, AdamConfig config = {});

  void step(double lr);
  void zero_grad();

  const NamedTensors& params() const { return params_; }
  std::uint64_t steps_taken() const { return t_; }
  void set_steps_taken(std::uint64_t t) { t_ = t; }
  std::vector<Tensor>& first_moment() { return m_; }
  std::vector<Tensor>& second_moment() { return v_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  NamedTensors params_;
  AdamConfig config_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

/// Scales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const NamedTensors& params, double max_norm);

}  // namespace vega
