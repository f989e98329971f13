#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace glyphnet {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Independent stream derived from a master seed and a path of indices
/// (epoch, sample, worker, ...). Same inputs always give the same stream.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (const auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ull));
  return Rng(h);
}

}  // namespace glyphnet
