#include "vega/optim.hpp"

#include <cmath>

#include "vega/error.hpp"

namespace vega {

Adam::Adam(NamedTensors params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& [name, t] : params_) {
    m_.emplace_back(t->shape());
    v_.emplace_back(t->shape());
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k].second;
    if (!p.requires_grad()) continue;
    auto g = p.grad();
    auto m = m_[k].values();
    auto v = v_[k].values();
    auto w = p.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, t] : params_) t->zero_grad();
}

double clip_grad_norm(const NamedTensors& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ValidationError("clip_grad_norm: max_norm must be positive");
  double sq = 0.0;
  for (const auto& [name, t] : params) {
    for (double g : t->grad()) sq += g * g;
  }
  const double total = std::sqrt(sq);
  if (total > max_norm) {
    const double s = max_norm / total;
    for (const auto& [name, t] : params) {
      for (double& g : t->grad()) g *= s;
    }
  }
  return total;
}

}  // namespace vega
