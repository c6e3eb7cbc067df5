#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace asymcity {

/// 64-bit FNV-1a; used for seed derivation and config digests.
std::uint64_t fnv1a(std::string_view text);

/// Sub-seed for a named stage: master XOR fnv1a(tag).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  return master ^ fnv1a(tag);
}

/// Deterministic generator. The engine is std::mt19937_64; the conversions
/// to real/integer/normal draws are spelled out here so sequences do not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), rejection-sampled.
  std::uint64_t below(std::uint64_t n);
  double normal(double mean, double stddev);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace asymcity
