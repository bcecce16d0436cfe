#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vega/autodiff.hpp"
#include "vega/rng.hpp"
#include "vega/tensor.hpp"

namespace vega {

struct EncoderConfig {
  std::size_t image_size = 32;
  std::size_t patch_size = 8;
  std::size_t channels = 3;
  std::size_t embed_dim = 32;
  std::size_t num_blocks = 4;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  std::uint64_t seed = 1;

  void validate() const;
  std::size_t grid() const { return image_size / patch_size; }
  std::size_t num_tokens() const { return grid() * grid(); }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  std::size_t hidden_dim() const { return embed_dim * mlp_ratio; }

  bool operator==(const EncoderConfig&) const = default;
};

struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  Tensor qkv_weight;  // [d x 3d], no bias
  Tensor proj_weight, proj_bias;
  Tensor ln2_gain, ln2_bias;
  Tensor fc1_weight, fc1_bias;
  Tensor fc2_weight, fc2_bias;
};

/// Pre-norm patch transformer. Weights are stored [in x out] and applied to
/// token rows as x * W + b.
struct EncoderParams {
  EncoderConfig config;
  Tensor patch_weight, patch_bias;
  Tensor pos_embed;  // [N x d]
  std::vector<BlockParams> blocks;
  Tensor norm_gain, norm_bias;
  bool frozen = false;

  // Stable name -> tensor listing; the order is the serialization order.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  std::size_t parameter_count() const;
  // Frozen parameters carry no gradient buffers.
  void freeze();
  void unfreeze();
  // FNV-1a over the parameter bytes in named() order.
  std::uint64_t hash() const;
};

// Closed-form parameter count for a configuration.
std::size_t encoder_parameter_count(const EncoderConfig& config);

/// Deterministic from config.seed: Xavier-uniform weight matrices, zero
/// biases, unit LayerNorm gains, N(0, 0.02^2) positional embeddings.
EncoderParams init_encoder(const EncoderConfig& config);

struct PatchTokenMap {
  Tensor tokens;  // [N x d]
  std::size_t block_index = 0;
  std::size_t source_id = 0;
};

// [C x H x W] image -> [N x C*p*p] patch rows, patches in row-major grid order.
Tensor patchify(const Tensor& image, const EncoderConfig& config);
// Row-stacks patchify() of several images: [(B*N) x C*p*p].
Tensor patchify_batch(std::span<const Tensor* const> images, const EncoderConfig& config);

/// Runs the first `depth` blocks on row-stacked patches [(B*N) x C*p*p].
/// Entry i of the result is the residual stream after block i; when depth
/// equals num_blocks the last entry is taken after the final LayerNorm.
std::vector<ad::Var> encode_on_tape(ad::Tape& tape, EncoderParams& params, ad::Var patches, std::size_t depth);

/// One token map per block, in block order.
std::vector<PatchTokenMap> encode(const Tensor& image, const EncoderParams& params, std::size_t source_id = 0);

// Second-to-last block (index L-2): the student's working layer.
const PatchTokenMap& extract_student_tokens(std::span<const PatchTokenMap> blocks);
// Last block (index L-1): the teacher's output layer.
const PatchTokenMap& extract_teacher_tokens(std::span<const PatchTokenMap> blocks);

// Token maps an action head or probe reads: blocks 0..L-2 only.
inline std::size_t student_depth(const EncoderConfig& config) { return config.num_blocks - 1; }

// Helpers shared by the other parameter sets.
void xavier_uniform(Tensor& weight, Rng& rng);
std::uint64_t fnv1a(std::span<const double> values, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace vega
