#pragma once

#include <cstdint>

namespace shapecomp {

/// Counter-based generator: output k is a SplitMix64 finalization of
/// (key, k). Streams for sub-tasks are derived with `derive_seed`, so any
/// per-sample stream can be reconstructed from the root seed alone.
/// Distribution code is our own, so sequences are identical across
/// standard-library implementations.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller (one draw per call, no caching).
  double normal();

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the `index`-th child stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace shapecomp
