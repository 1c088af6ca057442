#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "gpgibbs/fields.hpp"
#include "gpgibbs/rng.hpp"

namespace testing {

inline gpgibbs::Field random_field(int modes, std::uint64_t seed, double scale = 1.0) {
  gpgibbs::Rng rng(seed);
  gpgibbs::CVector c = gpgibbs::standard_complex_normals(rng, modes);
  for (int n = 0; n < modes; ++n) c[n] *= scale / std::sqrt(1.0 + n);
  return gpgibbs::Field(c);
}

// Standard error of a sample mean from running sums.
struct Moments {
  double n = 0, s = 0, s2 = 0;
  void add(double x) { n += 1; s += x; s2 += x * x; }
  [[nodiscard]] double mean() const { return s / n; }
  [[nodiscard]] double var() const { return (s2 - s * s / n) / (n - 1); }
  [[nodiscard]] double se() const { return std::sqrt(var() / n); }
};

}  // namespace testing
