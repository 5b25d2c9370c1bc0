#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "smtl/types.hpp"

namespace smtl {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of an independent substream identified by (seed, a, b).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

/// FNV-1a, used to turn stream labels and config text into seeds.
constexpr std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Engine make_engine(std::uint64_t seed) { return Engine(seed); }

inline Matrix gaussian_matrix(Engine& rng, Eigen::Index rows, Eigen::Index cols,
                              double stddev = 1.0) {
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline Vector gaussian_vector(Engine& rng, Eigen::Index size, double stddev = 1.0) {
  return gaussian_matrix(rng, size, 1, stddev).col(0);
}

/// Uniform draw on the sphere of the given radius.
inline Vector sphere_vector(Engine& rng, Eigen::Index size, double radius = 1.0) {
  Vector v;
  do {
    v = gaussian_vector(rng, size);
  } while (v.norm() == 0.0);
  return v * (radius / v.norm());
}

}  // namespace smtl
