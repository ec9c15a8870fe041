#pragma once

#include <cstdint>
#include <random>

namespace oslab {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent generator for (seed, index, salt). Each sample owns one.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index,
                              std::uint64_t salt = 0) {
  std::uint64_t st = seed;
  std::uint64_t a = splitmix64(st) ^ index;
  std::uint64_t b = splitmix64(a) ^ salt;
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform in [0,1) from the top 53 bits.
inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

}  // namespace oslab
