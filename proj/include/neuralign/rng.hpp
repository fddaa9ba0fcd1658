#pragma once

#include <cstdint>

namespace neuralign {

// Counter-based generator: output i of a stream is splitmix64's finalizer
// applied to key + i*phi, where key is derived from (seed, stream). State is
// two integers, so the same (seed, stream, call sequence) produces the same
// bits on every platform, and distinct streams can be handed to concurrent
// users without sharing.
struct RngState {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  RngState() = default;
  explicit RngState(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform in (0, 1], 53-bit resolution.
  double next_uniform();

  // Standard normal via Box-Muller (two uniforms per draw, cosine branch).
  double next_gaussian();
};

}  // namespace neuralign
