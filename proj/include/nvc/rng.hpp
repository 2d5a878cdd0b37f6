#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nvc {

// All randomness in the library flows through these helpers so that a seed
// reproduces bit-identical runs regardless of the standard library's
// distribution implementations.

inline double unit_double(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline float unit_float(std::mt19937_64& g) {
  return static_cast<float>(g() >> 40) * 0x1.0p-24f;  // [0, 1)
}

template <typename T>
inline T uniform(std::mt19937_64& g, T lo, T hi) {
  return lo + static_cast<T>(unit_double(g)) * (hi - lo);
}

/// Integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
  return g() % n;
}

/// Standard normal draw via Box-Muller (one value per call).
inline float normal_float(std::mt19937_64& g) {
  double u1 = unit_double(g);
  while (u1 <= 0.0) u1 = unit_double(g);
  const double u2 = unit_double(g);
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                            std::cos(6.283185307179586 * u2));
}

/// Derives an independent stream seed from a base seed and a stream id
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace nvc
