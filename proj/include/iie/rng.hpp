#pragma once

#include <cstdint>
#include <random>

namespace iie {

/// splitmix64 mixing step; used to derive independent child seeds from a
/// single root seed so that per-cluster / per-stage streams never overlap.
inline std::uint64_t mix_seed(std::uint64_t seed) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child stream `index` of a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return mix_seed(root ^ mix_seed(index));
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::uint64_t index = 0) {
  return std::mt19937_64(derive_seed(root, index));
}

}  // namespace iie
