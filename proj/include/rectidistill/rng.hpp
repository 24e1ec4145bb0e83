#pragma once

#include <array>
#include <cstdint>

namespace rectidistill {

/// SplitMix64 step. Used to expand a 64-bit seed into generator state and to
/// derive per-stream seeds (e.g. one stream per epoch).
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes two 64-bit words into one seed; stream(seed, k) != stream(seed, k+1).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// xoshiro256** 1.0 (Blackman & Vigna). The only source of randomness in the
/// project; the state is filled from four successive splitmix64 outputs.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next();
  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  /// Uniform in [0, 1) with 53 random bits: (next() >> 11) * 2^-53.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Unbiased integer in [0, bound) by rejection on the top bits.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller, consuming exactly two uniforms per call.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace rectidistill
