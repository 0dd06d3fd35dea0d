#pragma once

#include <cstdint>
#include <random>

namespace retina {

/// Seedable generator used for every stochastic step in the pipeline.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distribution transforms below are written out by hand
/// because the standard library's distributions are implementation-defined:
///
///   uniform01   top 53 bits of one engine draw, scaled by 2^-53, in [0, 1)
///   uniform_int rejection sampling on the raw 64-bit draw, unbiased
///   normal      Box-Muller on (1 - uniform01, uniform01); the cosine variate
///               is returned first and the sine variate is cached for the
///               next call
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// Derives an independent stream seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace retina
