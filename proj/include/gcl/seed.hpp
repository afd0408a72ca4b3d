#pragma once

// Seed splitting.
//
// Every random draw in the library comes from a std::mt19937_64 seeded with
// derive(root, {stream, i, j, ...}). The derivation folds each path element
// into the root through the splitmix64 finalizer:
//
//   s0 = mix(root ^ 0x9E3779B97F4A7C15)
//   s_{k+1} = mix(s_k ^ mix(path_k + 0x9E3779B97F4A7C15))
//
// Streams are fixed small integers so that, for example, batch sampling at
// step t never shares a generator with augmentation at step t.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gcl::seed {

enum Stream : std::uint64_t {
  kDataMeans = 1,
  kDataImages = 2,
  kDataLabels = 3,
  kInit = 4,
  kBatch = 5,
  kAugment = 6,
  kPixelPlan = 7,
  kProbe = 8,
};

constexpr std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix(root ^ 0x9E3779B97F4A7C15ULL);
  for (std::uint64_t p : path) s = mix(s ^ mix(p + 0x9E3779B97F4A7C15ULL));
  return s;
}

inline std::mt19937_64 rng(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(derive(root, path));
}

}  // namespace gcl::seed
