#pragma once

// Portable draws on top of mt19937_64: the standard distributions are not
// specified bit-for-bit across library implementations.

#include <cstdint>
#include <random>

namespace artk {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream for (seed, purpose, index).
inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  return Rng(splitmix64(splitmix64(seed ^ splitmix64(stream)) + index));
}

// [0, 1) with 53 random bits
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Unbiased integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

}  // namespace artk
