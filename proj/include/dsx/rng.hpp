#pragma once

#include <cstdint>

namespace dsx {

// The one generator used for every randomized operation in the pipeline.
// xoshiro256** is portable and fully specified, so manifests, checkpoints
// and reports are reproducible across builds. Not cryptographic.
inline constexpr const char* kPrngAlgorithm = "xoshiro256**";

uint64_t splitmix64(uint64_t& state);

// Stable mix of a base seed and a stream index (per-record seeding).
uint64_t hash_seed(uint64_t seed, uint64_t index);

class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // [0, 1)
  double uniform();
  // [lo, hi)
  double uniform(double lo, double hi);
  // [0, n), Lemire reduction
  uint64_t uniform_index(uint64_t n);
  // [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi);
  // standard normal, Box-Muller
  double normal();

 private:
  uint64_t s_[4];
};

}  // namespace dsx
