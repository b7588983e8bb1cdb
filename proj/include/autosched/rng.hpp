#pragma once

// Counter-based random numbers. Every draw is a pure function of a key, so
// results do not depend on the order in which a simulation asks for them.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace autosched::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Hash a sequence of words into one 64-bit key.
constexpr std::uint64_t mix(std::initializer_list<std::uint64_t> words) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t w : words) {
    h = splitmix64(h ^ splitmix64(w));
  }
  return h;
}

/// Uniform in the open interval (0, 1).
constexpr double to_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(std::uint64_t key) noexcept { return to_unit(splitmix64(key)); }

/// Standard normal via Box-Muller on two derived uniforms.
inline double normal(std::uint64_t key) noexcept {
  const double u1 = to_unit(splitmix64(key ^ 0xA5A5A5A5A5A5A5A5ULL));
  const double u2 = to_unit(splitmix64(key + 0x5851F42D4C957F2DULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Log-normal multiplier with mean 1 and relative standard deviation `rel_sigma`.
inline double lognormal_factor(std::uint64_t key, double rel_sigma) noexcept {
  if (rel_sigma <= 0.0) return 1.0;
  const double s2 = std::log1p(rel_sigma * rel_sigma);
  return std::exp(std::sqrt(s2) * normal(key) - 0.5 * s2);
}

}  // namespace autosched::rng
