// SPDX-License-Identifier: Apache-2.0
// Seed derivation: one global seed fans out to independent per-stage streams.
#ifndef LINKDISTILL_RNG_HPP_
#define LINKDISTILL_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace linkdistill {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Seed for a named stage. Depends only on (seed, tag), so adding a stage
/// or a heuristic never shifts another stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ splitmix64(fnv1a(tag)));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 0x5851f42d4c957f2dull));
}

using Rng = std::mt19937_64;

}  // namespace linkdistill

#endif  // LINKDISTILL_RNG_HPP_
