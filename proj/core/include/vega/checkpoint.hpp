#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vega/alignment_params.hpp"
#include "vega/encoder.hpp"
#include "vega/policy_head.hpp"

namespace vega {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  std::uint64_t step = 0;
  std::uint64_t adam_steps = 0;
  std::vector<Tensor> adam_m, adam_v;  // parameter order of the trainer
  std::array<std::uint64_t, 4> rng{};
  // Running sums of the current logging interval: total, action, align, count.
  std::array<double, 4> interval{};

  bool operator==(const TrainState&) const;
};

/// Encoder plus whatever else the run produced. A teacher checkpoint carries
/// the encoder alone; inference checkpoints add the action head; training
/// checkpoints add the projector and optimizer state.
struct Checkpoint {
  EncoderParams encoder;
  std::optional<ActionHeadParams> head;
  std::optional<ProjectorParams> projector;
  std::optional<TrainState> state;

  bool is_inference() const { return head.has_value() && !projector && !state; }
};

/// "VEGC", u32 version, u32 section count, then per section:
/// u32 name length, name, u64 payload length, payload (a VEGD tensor).
/// Integers are stored as tensors of 32-bit halves so every value is exact.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& context);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Keeps the encoder and head only.
Checkpoint inference_checkpoint(const Checkpoint& ckpt);

}  // namespace vega
