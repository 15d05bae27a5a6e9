#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace cmr {

using Rng = std::mt19937_64;

/// Derives independent stream seeds from a base seed.
inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// The helpers below avoid std:: distributions so draws are identical across
// standard library implementations.

inline double uniform01(Rng& g) noexcept {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& g, double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform01(g);
}

/// Unbiased integer in [0, n). n must be > 0.
inline std::uint64_t uniform_index(Rng& g, std::uint64_t n) noexcept {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = g();
  while (r >= limit) r = g();
  return r % n;
}

/// Standard normal via Box-Muller (one value per call).
inline double normal01(Rng& g) noexcept {
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename It>
void shuffle_range(It first, It last, Rng& g) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = uniform_index(g, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace cmr
