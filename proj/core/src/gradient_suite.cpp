#include "vega/gradient_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>

#include "vega/alignment.hpp"
#include "vega/error.hpp"
#include "vega/gradcheck.hpp"
#include "vega/model.hpp"
#include "vega/rng.hpp"

namespace vega {

namespace {

using ad::Tape;
using ad::Var;

constexpr std::size_t kMaxDraws = 64;

Tensor normal_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

// Magnitudes in [0.5, 1.5] with random signs.
Tensor random_weights(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (double& v : t.values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
  return t;
}

Tensor uniform_tensor(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

struct Instance {
  std::vector<Tensor*> params;
  ad::ScalarFn fn;
  std::shared_ptr<void> storage;
};
using Builder = std::function<Instance(Rng&)>;

using Op = std::function<Var(std::vector<Var>&)>;

// Inputs drawn by `draw`; tensor outputs reduced as sum(w * y).
Builder op_case(std::function<std::vector<Tensor>(Rng&)> draw, Op op) {
  return [draw = std::move(draw), op = std::move(op)](Rng& rng) {
    struct Data {
      std::vector<Tensor> inputs;
      Tensor w;
      bool scalar = false;
    };
    auto d = std::make_shared<Data>();
    d->inputs = draw(rng);
    {
      Tape probe(false);
      std::vector<Var> x;
      for (Tensor& t : d->inputs) x.push_back(probe.param(t));
      const Shape shape = op(x).shape();
      d->scalar = shape_size(shape) == 1;
      if (!d->scalar) d->w = random_weights(shape, rng);
    }
    Instance inst;
    for (Tensor& t : d->inputs) inst.params.push_back(&t);
    Data* raw = d.get();
    inst.fn = [raw, op](Tape& tape) {
      std::vector<Var> x;
      for (Tensor& t : raw->inputs) x.push_back(tape.param(t));
      Var y = op(x);
      return raw->scalar ? y : ad::sum(ad::mul(y, tape.constant(raw->w)));
    };
    inst.storage = d;
    return inst;
  };
}

std::function<std::vector<Tensor>(Rng&)> normals(std::vector<Shape> shapes) {
  return [shapes](Rng& rng) {
    std::vector<Tensor> out;
    for (const Shape& s : shapes) out.push_back(normal_tensor(s, rng));
    return out;
  };
}

EncoderConfig tiny_encoder(std::uint64_t seed) {
  EncoderConfig c;
  c.image_size = 4;
  c.patch_size = 2;
  c.channels = 3;
  c.embed_dim = 4;
  c.num_blocks = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  c.seed = seed;
  return c;
}

Builder student_tokens_case() {
  return [](Rng& rng) {
    struct Data {
      EncoderParams enc;
      Tensor patches, w;
    };
    auto d = std::make_shared<Data>();
    d->enc = init_encoder(tiny_encoder(rng.next_u64()));
    const std::size_t rows = 2 * d->enc.config.num_tokens();
    d->patches = normal_tensor({rows, d->enc.config.patch_dim()}, rng, 2.0);
    d->w = random_weights({rows, d->enc.config.embed_dim}, rng);
    Instance inst;
    for (auto& [name, t] : d->enc.named()) inst.params.push_back(t);
    Data* raw = d.get();
    inst.fn = [raw](Tape& tape) {
      Var tokens = student_tokens_on_tape(tape, raw->enc, tape.constant(raw->patches));
      return ad::sum(ad::mul(tokens, tape.constant(raw->w)));
    };
    inst.storage = d;
    return inst;
  };
}

// L_action + lambda * L_align through encoder, action head and projector.
Builder joint_loss_case() {
  return [](Rng& rng) {
    struct Data {
      EncoderParams enc;
      ActionHeadParams head;
      ProjectorParams proj;
      Tensor patches, teacher, gt;
    };
    auto d = std::make_shared<Data>();
    const EncoderConfig cfg = tiny_encoder(rng.next_u64());
    const std::size_t batch = 2, n = cfg.num_tokens();
    d->enc = init_encoder(cfg);
    d->head = init_action_head(cfg.embed_dim, kActionDim, rng.next_u64());
    d->proj = init_projector(cfg.embed_dim, rng.next_u64());
    // Nonzero biases so their gradients are not a special case.
    for (Tensor* t : {&d->head.b1, &d->head.b2, &d->proj.b1, &d->proj.b2, &d->proj.ln_bias}) {
      for (double& v : t->values()) v = 0.1 * rng.normal();
    }
    d->patches = normal_tensor({batch * n, cfg.patch_dim()}, rng, 2.0);
    d->teacher = normal_tensor({batch * n, cfg.embed_dim}, rng);
    d->gt = normal_tensor({batch, kActionDim}, rng);
    Instance inst;
    for (auto& [name, t] : d->enc.named()) inst.params.push_back(t);
    for (auto& [name, t] : d->head.named()) inst.params.push_back(t);
    for (auto& [name, t] : d->proj.named()) inst.params.push_back(t);
    Data* raw = d.get();
    inst.fn = [raw, n](Tape& tape) {
      Var tokens = student_tokens_on_tape(tape, raw->enc, tape.constant(raw->patches));
      Var la = action_loss(action_head_forward(tape, raw->head, tokens, n), tape.constant(raw->gt));
      Var lg = align_loss(project(tape, raw->proj, tokens), tape.constant(raw->teacher));
      return vega_loss(la, lg, AlignmentConfig{0.1, true});
    };
    inst.storage = d;
    return inst;
  };
}

std::vector<std::pair<std::string, Builder>> cases() {
  std::vector<std::pair<std::string, Builder>> c;
  auto un = [](Var (*f)(Var)) { return Op([f](std::vector<Var>& x) { return f(x[0]); }); };
  auto bin = [](Var (*f)(Var, Var)) { return Op([f](std::vector<Var>& x) { return f(x[0], x[1]); }); };
  c.emplace_back("matmul", op_case(normals({{3, 4}, {4, 5}}), bin(ad::matmul)));
  c.emplace_back("transpose", op_case(normals({{3, 4}}), un(ad::transpose)));
  c.emplace_back("add", op_case(normals({{3, 4}, {3, 4}}), bin(ad::add)));
  c.emplace_back("sub", op_case(normals({{3, 4}, {3, 4}}), bin(ad::sub)));
  c.emplace_back("mul", op_case(normals({{3, 4}, {3, 4}}), bin(ad::mul)));
  c.emplace_back("scale", op_case(normals({{3, 4}}), Op([](std::vector<Var>& x) { return ad::scale(x[0], -1.7); })));
  c.emplace_back("add_bias", op_case(normals({{3, 4}, {4}}), bin(ad::add_bias)));
  c.emplace_back("add_tiled", op_case(normals({{6, 4}, {3, 4}}), bin(ad::add_tiled)));
  c.emplace_back("slice_rows",
                 op_case(normals({{5, 3}}), Op([](std::vector<Var>& x) { return ad::slice_rows(x[0], 1, 3); })));
  c.emplace_back("layer_norm", op_case(normals({{4, 6}, {6}, {6}}), Op([](std::vector<Var>& x) {
                                         return ad::layer_norm(x[0], x[1], x[2]);
                                       })));
  c.emplace_back("gelu", op_case([](Rng& rng) { return std::vector<Tensor>{uniform_tensor({3, 5}, rng, -3.0, 3.0)}; },
                                 un(ad::gelu)));
  c.emplace_back("softmax", op_case(normals({{3, 5}}), un(ad::softmax)));
  c.emplace_back("self_attention", op_case(normals({{8, 12}}), Op([](std::vector<Var>& x) {
                                             return ad::self_attention(x[0], 4, 2);
                                           })));
  c.emplace_back("mean_pool",
                 op_case(normals({{6, 3}}), Op([](std::vector<Var>& x) { return ad::mean_pool(x[0], 3); })));
  c.emplace_back("sum", op_case(normals({{3, 4}}), Op([](std::vector<Var>& x) { return ad::sum(ad::mul(x[0], x[0])); })));
  c.emplace_back("mean",
                 op_case(normals({{3, 4}}), Op([](std::vector<Var>& x) { return ad::mean(ad::mul(x[0], x[0])); })));
  c.emplace_back("mse", op_case(normals({{3, 4}, {3, 4}}), bin(ad::mse)));
  c.emplace_back("l1", op_case(normals({{3, 4}, {3, 4}}), bin(ad::l1)));
  c.emplace_back("cosine_distance", op_case(normals({{5, 4}, {5, 4}}), bin(ad::cosine_distance)));
  c.emplace_back("encoder_student_tokens", student_tokens_case());
  c.emplace_back("vega_loss", joint_loss_case());
  return c;
}

bool well_conditioned(const Instance& inst) {
  for (Tensor* p : inst.params) p->set_requires_grad(true);
  Tape tape;
  tape.backward(inst.fn(tape));
  bool ok = true;
  for (Tensor* p : inst.params) {
    for (double g : p->grad()) {
      if (g != 0.0 && std::abs(g) < kMinCheckedGradient) ok = false;
    }
    p->zero_grad();
  }
  return ok;
}

}  // namespace

std::vector<std::uint64_t> gradient_suite_seeds() {
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  return seeds;
}

std::vector<GradSuiteEntry> run_gradient_suite(const std::vector<std::uint64_t>& seeds, double h) {
  std::vector<GradSuiteEntry> out;
  const auto all = cases();
  for (std::uint64_t seed : seeds) {
    for (std::size_t k = 0; k < all.size(); ++k) {
      const auto& [name, build] = all[k];
      Rng rng(derive_seed(derive_seed(seed, 101), k));
      GradSuiteEntry e;
      e.name = name;
      e.seed = seed;
      Instance inst = build(rng);
      while (!well_conditioned(inst)) {
        if (++e.resamples == kMaxDraws) {
          throw RuntimeFailure("gradient suite: no well-conditioned instance of " + name + " for seed " +
                               std::to_string(seed));
        }
        inst = build(rng);
      }
      const ad::GradCheckReport r = ad::gradient_check(inst.fn, inst.params, h);
      e.max_rel_error = r.max_rel_error;
      e.coordinates = r.coordinates;
      e.worst = r.worst;
      e.worst_analytic = r.worst_analytic;
      e.worst_numeric = r.worst_numeric;
      out.push_back(std::move(e));
    }
  }
  return out;
}

double worst_error(const std::vector<GradSuiteEntry>& entries) {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

}  // namespace vega
