#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gpgibbs/errors.hpp"
#include "gpgibbs/fields.hpp"
#include "helpers.hpp"

using namespace gpgibbs;

TEST_CASE("params validation") {
  GibbsParams p;
  CHECK_NOTHROW(p.validate());
  p.epsilon = 0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = GibbsParams{};
  p.shell_width = -1;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = GibbsParams{};
  p.chem_potential = -0.1;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = GibbsParams{};
  p.truncation = -1;
  CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("renorm constant") {
  GibbsParams p;
  p.epsilon = 1;
  p.truncation = 0;
  CHECK(renorm_constant(p) == doctest::Approx(1.0));
  p.truncation = 2;
  CHECK(renorm_constant(p) == doctest::Approx(23.0 / 15.0));
  const double full = renorm_constant(p);
  p.epsilon = 0.5;
  CHECK(renorm_constant(p) == doctest::Approx(full / 2));
}

TEST_CASE("wick mass") {
  GibbsParams p;
  p.epsilon = 1;
  p.truncation = 2;
  const auto b = build_basis(2);
  CHECK(wick_mass(b, p, Field::zero(3)) == doctest::Approx(-23.0 / 15.0));
  const double d = 2.5;
  CHECK(wick_mass(b, p, Field::unit(3, 0, std::sqrt(d))) == doctest::Approx(d - 23.0 / 15.0));
}

TEST_CASE("gaussian law per mode and of the Wick mass") {
  const int n_modes = 9;
  const auto b = build_basis(n_modes - 1);
  GibbsParams p;
  p.epsilon = 1;
  p.truncation = n_modes - 1;
  Rng rng(42);
  std::vector<testing::Moments> var(n_modes);
  testing::Moments wick, cross;
  for (int s = 0; s < 40000; ++s) {
    const Field f = sample_gaussian(b, p, rng);
    for (int n = 0; n < n_modes; ++n) var[n].add(std::norm(f.coeffs[n]));
    wick.add(wick_mass(b, p, f));
    cross.add((f.coeffs[1] * std::conj(f.coeffs[2])).real());
  }
  for (int n = 0; n < n_modes; ++n) CHECK(std::abs(var[n].mean() - 1.0 / (1 + 2 * n)) <= 3 * var[n].se());
  CHECK(std::abs(wick.mean()) <= 3 * wick.se());
  double v = 0;
  for (int n = 0; n < n_modes; ++n) v += 1.0 / ((1.0 + 2 * n) * (1.0 + 2 * n));
  CHECK(wick.var() == doctest::Approx(v).epsilon(0.1));
  CHECK(std::abs(cross.mean()) <= 3 * cross.se());

  // Mean L^2 mass grows with the truncation as eps * sum 1/(1+2n).
  p.epsilon = 0.3;
  testing::Moments m;
  for (int s = 0; s < 20000; ++s) m.add(sample_gaussian(b, p, rng).coeffs.squaredNorm());
  CHECK(std::abs(m.mean() - renorm_constant(p)) <= 3 * m.se());
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto b = build_basis(4);
  GibbsParams p;
  p.truncation = 4;
  Rng a(9), c(9);
  CHECK((sample_gaussian(b, p, a).coeffs - sample_gaussian(b, p, c).coeffs).norm() == 0.0);
  p.epsilon = 1e-300;
  CHECK(sample_gaussian(b, p, a).coeffs.norm() < 1e-140);
}

TEST_CASE("gaussian log density") {
  const auto b = build_basis(4);
  GibbsParams p;
  p.truncation = 4;
  p.epsilon = 0.7;
  const Field phi = testing::random_field(5, 8);
  const Field q = testing::random_field(5, 9);
  CHECK(gaussian_logdensity(b, p, phi.rotated(1.1)) == doctest::Approx(gaussian_logdensity(b, p, phi)).epsilon(1e-14));

  // Shift identity for the density with E|c_n|^2 = eps / lambda_n^2.
  const double lhs = gaussian_logdensity(b, p, phi + q) - gaussian_logdensity(b, p, phi);
  const double rhs = -2 * h1_pairing(b, q, phi) / p.epsilon - h1_pairing(b, q, q) / p.epsilon;
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  const auto b0 = build_basis(0);
  GibbsParams p0;
  p0.truncation = 0;
  p0.epsilon = 1;
  CHECK(gaussian_logdensity(b0, p0, Field::zero(1)) == doctest::Approx(-std::log(std::numbers::pi)));

  // Normalization over a tensor grid in (Re c_0, Im c_0).
  p0.epsilon = 0.5;
  const double h = 0.02, lim = 6.0;
  double total = 0;
  for (double x = -lim; x <= lim; x += h)
    for (double y = -lim; y <= lim; y += h)
      total += std::exp(gaussian_logdensity(b0, p0, Field::unit(1, 0, Complex(x, y)))) * h * h;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("phase rotation leaves the L2 statistics unchanged") {
  const auto b = build_basis(6);
  GibbsParams p;
  p.truncation = 6;
  Rng rng(5);
  for (int s = 0; s < 100; ++s) {
    const Field f = sample_gaussian(b, p, rng);
    CHECK(f.rotated(2.0).coeffs.squaredNorm() == doctest::Approx(f.coeffs.squaredNorm()).epsilon(1e-14));
  }
}
