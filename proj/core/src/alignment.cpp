#include "vega/alignment.hpp"

#include <cmath>

#include "vega/error.hpp"
#include "vega/rng.hpp"

namespace vega {

std::vector<std::pair<std::string, Tensor*>> ProjectorParams::named() {
  return {{"ln_gain", &ln_gain}, {"ln_bias", &ln_bias}, {"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}

std::vector<std::pair<std::string, const Tensor*>> ProjectorParams::named() const {
  return {{"ln_gain", &ln_gain}, {"ln_bias", &ln_bias}, {"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}};
}

std::size_t ProjectorParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

void ProjectorParams::set_trainable(bool trainable) {
  for (auto& [name, t] : named()) t->set_requires_grad(trainable);
}

std::size_t projector_parameter_count(std::size_t dim) { return 2 * dim * dim + 2 * dim + 2 * dim; }

ProjectorParams init_projector(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ValidationError("projector: dimension must be positive");
  Rng rng(seed);
  ProjectorParams p;
  p.ln_gain = Tensor::filled({dim}, 1.0);
  p.ln_bias = Tensor({dim});
  p.w1 = Tensor({dim, dim});
  xavier_uniform(p.w1, rng);
  p.b1 = Tensor({dim});
  p.w2 = Tensor({dim, dim});
  xavier_uniform(p.w2, rng);
  p.b2 = Tensor({dim});
  p.set_trainable(true);
  return p;
}

void AlignmentConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("alignment lambda must be a finite non-negative number");
  }
}

ad::Var project(ad::Tape& tape, ProjectorParams& projector, ad::Var tokens) {
  using namespace ad;
  if (tokens.value().cols() != projector.dim()) {
    throw ValidationError("projector expects token dim " + std::to_string(projector.dim()) + ", got " +
                          std::to_string(tokens.value().cols()));
  }
  Var x = layer_norm(tokens, tape.param(projector.ln_gain), tape.param(projector.ln_bias));
  x = gelu(add_bias(matmul(x, tape.param(projector.w1)), tape.param(projector.b1)));
  return add_bias(matmul(x, tape.param(projector.w2)), tape.param(projector.b2));
}

Tensor project(const PatchTokenMap& tokens, const ProjectorParams& projector) {
  ad::Tape tape(false);
  auto& p = const_cast<ProjectorParams&>(projector);
  return project(tape, p, tape.constant(tokens.tokens.detached())).value().detached();
}

ad::Var align_loss(ad::Var projected, ad::Var teacher) {
  if (teacher.tape()->requires_grad(teacher)) {
    throw ValidationError("align_loss: teacher tokens must be constants");
  }
  return ad::cosine_distance(projected, teacher);
}

double align_loss(const Tensor& projected, const Tensor& teacher) {
  ad::Tape tape(false);
  return align_loss(tape.constant(projected.detached()), tape.constant(teacher.detached())).value().item();
}

ad::Var action_loss(ad::Var pred, ad::Var gt) { return ad::mse(pred, gt); }

double action_loss(const Tensor& pred, const Tensor& gt) {
  ad::Tape tape(false);
  return ad::mse(tape.constant(pred.detached()), tape.constant(gt.detached())).value().item();
}

double vega_loss(double l_action, double l_align, const AlignmentConfig& cfg) {
  cfg.validate();
  if (!cfg.enabled) return l_action;
  return l_action + cfg.lambda * l_align;
}

ad::Var vega_loss(ad::Var l_action, ad::Var l_align, const AlignmentConfig& cfg) {
  cfg.validate();
  if (!cfg.enabled) return l_action;
  return ad::add(l_action, ad::scale(l_align, cfg.lambda));
}

std::size_t TrainedModel::parameter_count() const {
  return policy.parameter_count() + (projector ? projector->parameter_count() : 0);
}

PolicyModel strip_projector(const TrainedModel& model) { return model.policy; }

}  // namespace vega
