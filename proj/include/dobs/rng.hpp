#pragma once

#include <cstdint>
#include <random>

namespace dobs {

/// Named random substreams. Every draw in a simulation comes from an engine
/// keyed by (root seed, purpose, a, b), so adding or reordering consumers
/// never changes another consumer's numbers.
enum class Stream : std::uint64_t {
  InitialState = 1,
  Process = 2,
  Measurement = 3,
  InitialEstimate = 4,
  MonteCarlo = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 substream(std::uint64_t seed, Stream purpose,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return std::mt19937_64(h);
}

}  // namespace dobs
