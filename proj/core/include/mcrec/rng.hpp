#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mcrec {

// splitmix64 finalizer. Used to derive statistically independent
// sub-streams from (seed, tag, index) tuples so that every sampling
// site is reproducible in isolation.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ b);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b) ^ c);
}

// FNV-1a, also used for config hashing.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t a, std::string_view tag) {
  return mix64(a, fnv1a(tag));
}

inline std::uint64_t mix64(std::uint64_t a, std::string_view tag, std::uint64_t c) {
  return mix64(mix64(a, fnv1a(tag)) ^ c);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed));
}

}  // namespace mcrec
