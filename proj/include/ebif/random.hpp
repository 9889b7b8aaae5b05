#pragma once

#include <cstdint>

namespace ebif {

/// splitmix64 finalizer applied to (seed, index); each pair names one independent draw.
inline std::uint64_t hash_draw(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + index + 0x632BE59BD9B4E019ULL;
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Uniform double in [lo, hi) keyed on (seed, index).
inline double uniform(std::uint64_t seed, std::uint64_t index, double lo = 0.0, double hi = 1.0) {
  const double unit = static_cast<double>(hash_draw(seed, index) >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

}  // namespace ebif
