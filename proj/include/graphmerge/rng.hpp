#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace graphmerge {

/// 64-bit FNV-1a. Used for stable config hashes and seed derivation.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t hash = 0xcbf29ce484222325ULL);

/// Expands one base seed into an independent per-component seed:
/// splitmix64(base ^ fnv1a64(component)).
std::uint64_t derive_seed(std::uint64_t base, std::string_view component);

/// Deterministic random source. The distributions are written out here
/// instead of using <random>'s, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace graphmerge
