#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gpgibbs/errors.hpp"
#include "gpgibbs/spectral.hpp"
#include "helpers.hpp"

using namespace gpgibbs;

namespace {

// h_n(x) from the Hermite polynomial closed form, for small n only.
double h_direct(int n, double x) {
  double hm = 1.0, h = 2.0 * x;
  if (n == 0) h = 1.0;
  for (int k = 1; k < n; ++k) {
    const double next = 2.0 * x * h - 2.0 * k * hm;
    hm = h;
    h = next;
  }
  double fact = 1.0;
  for (int k = 2; k <= n; ++k) fact *= k;
  return h * std::exp(-x * x / 2) / std::sqrt(std::pow(2.0, n) * fact * std::sqrt(std::numbers::pi));
}

double gram_error(const HermiteBasis& b) {
  const Eigen::MatrixXd g = b.basis_table * b.quad_weights.asDiagonal() * b.basis_table.transpose();
  return (g - Eigen::MatrixXd::Identity(b.modes(), b.modes())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("eigenvalues are sqrt(1 + 2n)") {
  const auto b = build_basis(2, 8);
  REQUIRE(b.eigenvalues.size() == 3);
  CHECK(b.eigenvalues[0] == doctest::Approx(1.0));
  CHECK(b.eigenvalues[1] == doctest::Approx(std::sqrt(3.0)));
  CHECK(b.eigenvalues[2] == doctest::Approx(std::sqrt(5.0)));

  const auto b0 = build_basis(0);
  CHECK(b0.modes() == 1);
  CHECK(b0.eigenvalues[0] == 1.0);
}

TEST_CASE("basis invariants") {
  for (int n : {0, 1, 5, 16, 32, 64}) {
    const auto b = build_basis(n);
    CHECK(gram_error(b) <= 1e-8);
    for (Eigen::Index j = 0; j < b.quad_size(); ++j) CHECK(b.quad_weights[j] > 0);
    for (Eigen::Index j = 1; j < b.quad_size(); ++j) CHECK(b.quad_nodes[j] > b.quad_nodes[j - 1]);
    for (Eigen::Index k = 1; k < b.eigenvalues.size(); ++k) CHECK(b.eigenvalues[k] > b.eigenvalues[k - 1]);
  }
  CHECK(gram_error(build_basis(16, 64)) <= 1e-8);
  CHECK(default_quad_size(3) == 40);
  CHECK(default_quad_size(30) == 140);
}

TEST_CASE("build_basis rejects bad sizes") {
  CHECK_THROWS_AS((void)build_basis(-1, 10), ParameterError);
  CHECK_THROWS_AS((void)build_basis(4, 9), ParameterError);
  CHECK_NOTHROW((void)build_basis(4, 10));
}

TEST_CASE("recurrence matches the polynomial form at low order") {
  for (double x : {-2.3, -0.7, 0.0, 0.4, 1.9}) {
    const RVector h = hermite_functions(6, x);
    for (int n = 0; n <= 6; ++n) CHECK(h[n] == doctest::Approx(h_direct(n, x)).epsilon(1e-12));
  }
  CHECK(hermite_functions(0, 0.0)[0] == doctest::Approx(std::pow(std::numbers::pi, -0.25)));
}

TEST_CASE("synthesize") {
  const auto b = build_basis(16);
  const auto g0 = synthesize(b, Field::unit(17, 0).coeffs);
  for (Eigen::Index j = 0; j < b.quad_size(); ++j)
    CHECK(std::abs(g0.values[j] - Complex(hermite_functions(0, b.quad_nodes[j])[0])) < 1e-14);
  CHECK(hermite_functions(0, 0.0)[0] == doctest::Approx(0.75113).epsilon(1e-5));

  CHECK(synthesize(b, CVector::Zero(17)).values.norm() == 0.0);

  const auto a = testing::random_field(17, 1).coeffs;
  const auto c = testing::random_field(17, 2).coeffs;
  const CVector lhs = synthesize(b, a).values + synthesize(b, c).values;
  CHECK((lhs - synthesize(b, a + c).values).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS((void)synthesize(b, CVector::Zero(5)), ParameterError);
}

TEST_CASE("analyze is a left inverse on E_N") {
  const auto b = build_basis(16);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto c = testing::random_field(17, 100 + s).coeffs;
    CHECK((analyze(b, synthesize(b, c)) - c).cwiseAbs().maxCoeff() <= 1e-10);
  }
  GridFunction h3{CVector(b.quad_size())};
  GridFunction h17{CVector(b.quad_size())};
  for (Eigen::Index j = 0; j < b.quad_size(); ++j) {
    const RVector h = hermite_functions(17, b.quad_nodes[j]);
    h3.values[j] = h[3];
    h17.values[j] = h[17];
  }
  CHECK((analyze(b, h3) - Field::unit(17, 3).coeffs).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(analyze(b, h17).norm() <= 1e-6);
  CHECK_THROWS_AS((void)analyze(b, GridFunction{CVector::Zero(3)}), ParameterError);
}

TEST_CASE("sobolev norms") {
  const auto b = build_basis(4);
  for (int n = 0; n <= 4; ++n) {
    CHECK(norm_sobolev(b, Field::unit(5, n).coeffs, 1.0) == doctest::Approx(b.eigenvalues[n]));
    CHECK(norm_sobolev(b, Field::unit(5, n).coeffs, 2.0) == doctest::Approx(1.0 + 2 * n));
  }
  const auto c = testing::random_field(5, 3).coeffs;
  CHECK(norm_sobolev(b, c, 0.0) == doctest::Approx(c.norm()));
  const auto b1 = build_basis(1);
  CVector ones(2);
  ones << 1.0, 1.0;
  CHECK(norm_sobolev(b1, ones, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("lp norms") {
  const auto b = build_basis(16);
  const auto e0 = Field::unit(17, 0).coeffs;
  CHECK(std::pow(norm_lp(b, e0, 4.0), 4) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)).epsilon(1e-12));
  // int h_0^6 = pi^{-3/2} sqrt(pi/3)
  CHECK(std::pow(norm_lp(b, e0, 6.0), 6) == doctest::Approx(1.0 / (std::numbers::pi * std::sqrt(3.0))).epsilon(1e-12));
  CHECK(norm_lp(b, CVector::Zero(17), 4.0) == 0.0);
  const auto c = testing::random_field(17, 4).coeffs;
  for (double p : {2.0, 3.0, 4.0, 6.0}) CHECK(norm_lp(b, 2.0 * c, p) == doctest::Approx(2.0 * norm_lp(b, c, p)));
  CHECK(norm_lp(b, c, 2.0) == doctest::Approx(norm_sobolev(b, c, 0.0)).epsilon(1e-8));
  CHECK(norm_lp_is_exact(4.0));
  CHECK_FALSE(norm_lp_is_exact(3.0));
  CHECK_THROWS_AS((void)norm_lp(b, c, 0.5), ParameterError);
}

TEST_CASE("gns ratio") {
  const auto b = build_basis(16);
  const auto e0 = Field::unit(17, 0).coeffs;
  CHECK(gns_ratio(b, e0) == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)));
  const auto c = testing::random_field(17, 5).coeffs;
  CHECK(gns_ratio(b, 2.0 * c) == doctest::Approx(gns_ratio(b, c)));
  CHECK_THROWS_AS((void)gns_ratio(b, CVector::Zero(17)), DomainError);

  // The empirical constant is finite and roughly stable in N.
  const double c8 = estimate_gns_constant(build_basis(8), 2000, 3);
  const double c16 = estimate_gns_constant(b, 2000, 3);
  const double c32 = estimate_gns_constant(build_basis(32), 2000, 3);
  CHECK(std::isfinite(c16));
  CHECK(c16 >= gns_ratio(b, e0));
  CHECK(std::abs(c8 / c16 - 1) <= 0.1);
  CHECK(std::abs(c32 / c16 - 1) <= 0.1);
}
