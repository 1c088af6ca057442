#pragma once

#include <cstdint>
#include <random>

#include "gpgibbs/spectral.hpp"

namespace gpgibbs {

using Rng = std::mt19937_64;

/// Seed for an independent stream, derived from a base seed and a stream
/// index by splitmix64 finalization. Streams depend only on (base, stream),
/// never on scheduling.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent standard complex Gaussians with E|g|^2 = 1.
[[nodiscard]] inline CVector standard_complex_normals(Rng& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  CVector g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    g[i] = Complex(re, im);
  }
  return g;
}

}  // namespace gpgibbs
