#include "vega/encoder.hpp"

#include <bit>
#include <cmath>

#include "vega/error.hpp"
#include "vega/rng.hpp"

namespace vega {

void EncoderConfig::validate() const {
  if (image_size == 0 || patch_size == 0 || channels == 0 || embed_dim == 0 || num_blocks == 0 ||
      num_heads == 0 || mlp_ratio == 0) {
    throw ValidationError("encoder config: all extents must be positive");
  }
  if (image_size % patch_size != 0) {
    throw ValidationError("encoder config: image_size " + std::to_string(image_size) +
                          " is not divisible by patch_size " + std::to_string(patch_size));
  }
  if (embed_dim % num_heads != 0) {
    throw ValidationError("encoder config: embed_dim " + std::to_string(embed_dim) +
                          " is not divisible by num_heads " + std::to_string(num_heads));
  }
}

void xavier_uniform(Tensor& weight, Rng& rng) {
  if (weight.rank() != 2) throw ValidationError("xavier_uniform expects a matrix");
  const double bound = std::sqrt(6.0 / static_cast<double>(weight.dim(0) + weight.dim(1)));
  for (double& v : weight.values()) v = rng.uniform(-bound, bound);
}

std::uint64_t fnv1a(std::span<const double> values, std::uint64_t hash) {
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      hash ^= (bits >> (8 * i)) & 0xff;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

std::vector<std::pair<std::string, Tensor*>> EncoderParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out{
      {"patch_weight", &patch_weight}, {"patch_bias", &patch_bias}, {"pos_embed", &pos_embed}};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    out.insert(out.end(), {{p + "ln1_gain", &b.ln1_gain},
                           {p + "ln1_bias", &b.ln1_bias},
                           {p + "qkv_weight", &b.qkv_weight},
                           {p + "proj_weight", &b.proj_weight},
                           {p + "proj_bias", &b.proj_bias},
                           {p + "ln2_gain", &b.ln2_gain},
                           {p + "ln2_bias", &b.ln2_bias},
                           {p + "fc1_weight", &b.fc1_weight},
                           {p + "fc1_bias", &b.fc1_bias},
                           {p + "fc2_weight", &b.fc2_weight},
                           {p + "fc2_bias", &b.fc2_bias}});
  }
  out.insert(out.end(), {{"norm_gain", &norm_gain}, {"norm_bias", &norm_bias}});
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> EncoderParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<EncoderParams*>(this)->named()) out.emplace_back(name, t);
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : named()) n += t->size();
  return n;
}

void EncoderParams::freeze() {
  for (auto& [name, t] : named()) t->set_requires_grad(false);
  frozen = true;
}

void EncoderParams::unfreeze() {
  for (auto& [name, t] : named()) t->set_requires_grad(true);
  frozen = false;
}

std::uint64_t EncoderParams::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : named()) h = fnv1a(t->values(), h);
  return h;
}

std::size_t encoder_parameter_count(const EncoderConfig& c) {
  const std::size_t d = c.embed_dim, h = c.hidden_dim();
  const std::size_t per_block = 2 * d + 3 * d * d + (d * d + d) + 2 * d + (d * h + h) + (h * d + d);
  return c.patch_dim() * d + d + c.num_tokens() * d + c.num_blocks * per_block + 2 * d;
}

EncoderParams init_encoder(const EncoderConfig& config) {
  config.validate();
  const std::size_t d = config.embed_dim, h = config.hidden_dim();
  Rng rng(config.seed);
  EncoderParams p;
  p.config = config;
  p.patch_weight = Tensor({config.patch_dim(), d});
  xavier_uniform(p.patch_weight, rng);
  p.patch_bias = Tensor({d});
  p.pos_embed = Tensor({config.num_tokens(), d});
  for (double& v : p.pos_embed.values()) v = 0.02 * rng.normal();
  for (std::size_t i = 0; i < config.num_blocks; ++i) {
    BlockParams b;
    b.ln1_gain = Tensor::filled({d}, 1.0);
    b.ln1_bias = Tensor({d});
    b.qkv_weight = Tensor({d, 3 * d});
    xavier_uniform(b.qkv_weight, rng);
    b.proj_weight = Tensor({d, d});
    xavier_uniform(b.proj_weight, rng);
    b.proj_bias = Tensor({d});
    b.ln2_gain = Tensor::filled({d}, 1.0);
    b.ln2_bias = Tensor({d});
    b.fc1_weight = Tensor({d, h});
    xavier_uniform(b.fc1_weight, rng);
    b.fc1_bias = Tensor({h});
    b.fc2_weight = Tensor({h, d});
    xavier_uniform(b.fc2_weight, rng);
    b.fc2_bias = Tensor({d});
    p.blocks.push_back(std::move(b));
  }
  p.norm_gain = Tensor::filled({d}, 1.0);
  p.norm_bias = Tensor({d});
  p.unfreeze();
  return p;
}

Tensor patchify(const Tensor& image, const EncoderConfig& config) {
  const std::size_t s = config.image_size, ps = config.patch_size, c = config.channels;
  if (image.rank() != 3 || image.dim(0) != c || image.dim(1) != s || image.dim(2) != s) {
    throw ValidationError("encoder expects an image of shape " + shape_string({c, s, s}) + ", got " +
                          shape_string(image.shape()));
  }
  const std::size_t g = config.grid();
  Tensor out({config.num_tokens(), config.patch_dim()});
  std::size_t k = 0;
  for (std::size_t gy = 0; gy < g; ++gy)
    for (std::size_t gx = 0; gx < g; ++gx)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t py = 0; py < ps; ++py)
          for (std::size_t px = 0; px < ps; ++px) {
            out[k++] = image[(ch * s + gy * ps + py) * s + gx * ps + px];
          }
  return out;
}

Tensor patchify_batch(std::span<const Tensor* const> images, const EncoderConfig& config) {
  if (images.empty()) throw ValidationError("patchify_batch: empty batch");
  const std::size_t n = config.num_tokens(), pd = config.patch_dim();
  Tensor out({images.size() * n, pd});
  for (std::size_t b = 0; b < images.size(); ++b) {
    const Tensor one = patchify(*images[b], config);
    std::copy(one.values().begin(), one.values().end(), out.values().begin() + b * n * pd);
  }
  return out;
}

std::vector<ad::Var> encode_on_tape(ad::Tape& tape, EncoderParams& params, ad::Var patches, std::size_t depth) {
  using namespace ad;
  const auto& cfg = params.config;
  if (depth == 0 || depth > cfg.num_blocks) {
    throw ValidationError("encode: depth " + std::to_string(depth) + " outside [1, " +
                          std::to_string(cfg.num_blocks) + "]");
  }
  if (patches.value().rank() != 2 || patches.shape()[1] != cfg.patch_dim() ||
      patches.shape()[0] % cfg.num_tokens() != 0) {
    throw ValidationError("encode: patch matrix " + shape_string(patches.shape()) + " does not match config");
  }
  const std::size_t n = cfg.num_tokens();

  Var x = add_bias(matmul(patches, tape.param(params.patch_weight)), tape.param(params.patch_bias));
  x = add_tiled(x, tape.param(params.pos_embed));

  std::vector<Var> outputs;
  outputs.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    BlockParams& b = params.blocks[i];
    Var a = layer_norm(x, tape.param(b.ln1_gain), tape.param(b.ln1_bias));
    a = self_attention(matmul(a, tape.param(b.qkv_weight)), n, cfg.num_heads);
    x = add(x, add_bias(matmul(a, tape.param(b.proj_weight)), tape.param(b.proj_bias)));
    Var m = layer_norm(x, tape.param(b.ln2_gain), tape.param(b.ln2_bias));
    m = gelu(add_bias(matmul(m, tape.param(b.fc1_weight)), tape.param(b.fc1_bias)));
    x = add(x, add_bias(matmul(m, tape.param(b.fc2_weight)), tape.param(b.fc2_bias)));
    outputs.push_back(x);
  }
  if (depth == cfg.num_blocks) {
    outputs.back() = layer_norm(outputs.back(), tape.param(params.norm_gain), tape.param(params.norm_bias));
  }
  return outputs;
}

std::vector<PatchTokenMap> encode(const Tensor& image, const EncoderParams& params, std::size_t source_id) {
  ad::Tape tape(false);
  auto& mutable_params = const_cast<EncoderParams&>(params);  // bound read-only on a no-grad tape
  ad::Var patches = tape.constant(patchify(image, params.config));
  const auto vars = encode_on_tape(tape, mutable_params, patches, params.config.num_blocks);
  std::vector<PatchTokenMap> out;
  out.reserve(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) out.push_back({vars[i].value().detached(), i, source_id});
  return out;
}

const PatchTokenMap& extract_student_tokens(std::span<const PatchTokenMap> blocks) {
  if (blocks.size() < 2) {
    throw ValidationError("student extraction needs at least 2 blocks, got " + std::to_string(blocks.size()));
  }
  return blocks[blocks.size() - 2];
}

const PatchTokenMap& extract_teacher_tokens(std::span<const PatchTokenMap> blocks) {
  if (blocks.empty()) throw ValidationError("teacher extraction needs at least 1 block");
  return blocks.back();
}

}  // namespace vega
