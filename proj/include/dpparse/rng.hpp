#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dpparse {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

/// Independent stream for one utterance in one iteration; does not depend on
/// scheduling order or worker count.
inline Rng utterance_rng(std::uint64_t seed, std::string_view utterance_id, std::uint64_t iteration) {
  return Rng(splitmix64(splitmix64(seed ^ fnv1a(utterance_id)) + iteration));
}

/// Stream for a named, non-utterance purpose (subsampling, calibration, init).
inline Rng purpose_rng(std::uint64_t seed, std::string_view purpose) {
  return Rng(splitmix64(seed ^ splitmix64(fnv1a(purpose))));
}

} // namespace dpparse
