#pragma once

#include <cstdint>

namespace pacmc {

inline constexpr std::uint64_t kSeedStride = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Counter-based per-trial seed: a pure function of (base_seed, trial_index),
/// so outcomes do not depend on scheduling or worker count.
constexpr std::uint64_t derive_trial_seed(std::uint64_t base_seed, std::uint64_t trial_index) {
  return mix64(base_seed + (trial_index + 1) * kSeedStride);
}

/// Map 64 random bits to [0,1) with 53-bit resolution.
constexpr double uniform01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Small counter PRNG for experiment-side sampling.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += kSeedStride;
    return mix64(state_);
  }

  double next_unit() { return uniform01(next()); }

 private:
  std::uint64_t state_;
};

}  // namespace pacmc
