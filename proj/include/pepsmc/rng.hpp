#pragma once

#include <cstdint>
#include <random>

namespace pepsmc {

// All randomness in a run derives from one root seed. Streams are split by
// mixing the root with fixed tags through splitmix64, so e.g. walker k at GO
// step n always sees the same sequence regardless of thread scheduling.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t root, uint64_t tag_a, uint64_t tag_b = 0,
                            uint64_t tag_c = 0) {
  uint64_t s = splitmix64(root);
  s = splitmix64(s ^ tag_a);
  s = splitmix64(s ^ tag_b);
  return splitmix64(s ^ tag_c);
}

inline std::mt19937_64 make_rng(uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace pepsmc
