#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nsum {

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent engine from a root seed and a named stream.
/// Every random draw in the library flows through one of these, so results
/// do not depend on thread count or evaluation order.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(seed ^ hash_tag(tag));
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return std::mt19937_64(h);
}

}  // namespace nsum
