#include "neuralign/rng.hpp"

#include <cmath>
#include <numbers>

namespace neuralign {

namespace {

constexpr std::uint64_t kPhi = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

RngState::RngState(std::uint64_t seed, std::uint64_t stream)
    : key(mix(seed + kPhi * (stream + 1))), counter(0) {}

std::uint64_t RngState::next_u64() { return mix(key + kPhi * (++counter)); }

double RngState::next_uniform() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double RngState::next_gaussian() {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace neuralign
