#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace hdstat {

/// SplitMix64 (Steele, Lea, Flood 2014). The state is a plain 64-bit counter
/// advanced by the golden-ratio increment; each output is a bijective mix of
/// the counter. Construction hashes the seed once, so seeds `s` and `s + 1`
/// start at unrelated counters. Satisfies UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept
      : state_(mix(seed + kGamma)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    state_ += kGamma;
    return mix(state_);
  }

  constexpr void discard(std::uint64_t count) noexcept {
    state_ += count * kGamma;
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1): never returns 0, safe under log().
  constexpr double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound), Lemire's multiply-and-reject method.
  std::uint64_t below(std::uint64_t bound) noexcept {
    if (bound <= 1) return 0;
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  constexpr bool coin() noexcept { return ((*this)() >> 63) != 0; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

/// Seed for an independent sub-stream (e.g. placement vs. noise) of a
/// replicate seed: output number `stream` of SplitMix64(seed).
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  SplitMix64 g(seed);
  g.discard(stream);
  return g();
}

/// Standard normal variates by the Box-Muller transform. Every pair of
/// normals consumes exactly two uniforms (no rejection), so the sequence is a
/// fixed function of the seed.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) noexcept : bits_(seed) {}

  double operator()() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = bits_.uniform_open();
    const double u2 = bits_.uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  SplitMix64& bits() noexcept { return bits_; }

 private:
  SplitMix64 bits_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hdstat
