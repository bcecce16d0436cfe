#pragma once

#include <array>
#include <cstdint>

namespace vega {

std::uint64_t splitmix64(std::uint64_t& state);
// Stateless mix of a value; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t value);

/// xoshiro256** seeded through splitmix64. Every random draw in the project
/// goes through this generator so datasets and initializations are
/// reproducible across platforms.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed);
  static Rng from_state(const State& state);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

  const State& state() const { return state_; }

 private:
  Rng() = default;
  State state_{};
};

// Seed for a named sub-stream, e.g. derive_seed(seed, 2) for projector init.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace vega
