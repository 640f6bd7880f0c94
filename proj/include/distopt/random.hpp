#pragma once

#include <cstdint>

namespace distopt {

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based hash of (seed, a, b, c); sampling one counter never depends on another.
constexpr std::uint64_t CounterHash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                    std::uint64_t c = 0) {
  std::uint64_t h = Mix64(seed);
  h = Mix64(h ^ a);
  h = Mix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = Mix64(h ^ (c + 0x85157af5ULL));
  return h;
}

// Uniform double in [0, 1) from the top 53 bits.
constexpr double ToUnit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace distopt
