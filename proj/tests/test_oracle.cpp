#include <doctest.h>

#include <cmath>

#include "gpgibbs/energy.hpp"
#include "gpgibbs/errors.hpp"
#include "gpgibbs/ldp.hpp"
#include "gpgibbs/mcmc.hpp"
#include "gpgibbs/oracle.hpp"

using namespace gpgibbs;

namespace {

GibbsParams gaussian(int n, double d, double r) {
  GibbsParams p;
  p.truncation = n;
  p.epsilon = 0.5;
  p.coupling = 0;
  p.chem_potential = 0;
  p.mass_level = d;
  p.shell_width = r;
  return p;
}

// P(X_0 + X_1 > s) for independent exponentials with rates a, b.
double hypoexp_tail(double s, double a, double b) {
  return (b * std::exp(-a * s) - a * std::exp(-b * s)) / (b - a);
}

}  // namespace

TEST_CASE("oracle on the pure reference measure") {
  const auto b0 = build_basis(0);
  const auto p0 = gaussian(0, 1.0, 0.1);
  CHECK(quadrature_oracle(b0, p0, OracleObservable::Partition) == doctest::Approx(1.0).epsilon(1e-8));
  const double exact = std::exp(-(1 - 0.1 + 0.5) / 0.5) - std::exp(-(1 + 0.1 + 0.5) / 0.5);
  CHECK(std::abs(quadrature_oracle(b0, p0, OracleObservable::ShellProbability) - exact) <= 1e-6);

  const auto b1 = build_basis(1);
  const auto p1 = gaussian(1, 2.0, 0.25);
  CHECK(quadrature_oracle(b1, p1, OracleObservable::Partition) == doctest::Approx(1.0).epsilon(1e-8));
  const double sigma = 0.5 * (1 + 1.0 / 3);
  const double a = 1 / 0.5, c = 3 / 0.5;
  const double exact1 = hypoexp_tail(2.0 - 0.25 + sigma, a, c) - hypoexp_tail(2.0 + 0.25 + sigma, a, c);
  CHECK(std::abs(quadrature_oracle(b1, p1, OracleObservable::ShellProbability) - exact1) <= 1e-6);
  // E|c_0|^2 = eps under the reference.
  CHECK(quadrature_oracle(b1, p1, OracleObservable::GrandMoment) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(quadrature_oracle(b1, p1, OracleObservable::GrandSecondMoment) == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("oracle rejects large dimension") {
  const auto b = build_basis(2);
  CHECK_THROWS_AS((void)quadrature_oracle(b, gaussian(2, 1, 0.1), OracleObservable::Partition), ParameterError);
}

TEST_CASE("oracle is deterministic and consistent") {
  const auto b = build_basis(1);
  GibbsParams p = gaussian(1, 2.0, 0.3);
  p.coupling = 1.0;
  p.chem_potential = calibrate_A(b, 1.0, 1000).a0;
  const double z = quadrature_oracle(b, p, OracleObservable::Partition);
  const double sm = quadrature_oracle(b, p, OracleObservable::ShellMass);
  CHECK(quadrature_oracle(b, p, OracleObservable::ShellProbability) == doctest::Approx(sm / z).epsilon(1e-14));
  CHECK(z == quadrature_oracle(b, p, OracleObservable::Partition));
  // Refining the grid leaves the value unchanged.
  OracleGrid fine;
  fine.radial_panels = 192;
  fine.angle_points = 64;
  fine.phase_points = 64;
  CHECK(quadrature_oracle(b, p, OracleObservable::ShellProbability, fine) ==
        doctest::Approx(sm / z).epsilon(1e-8));
}

TEST_CASE("N = 1 shell probability: oracle against Monte Carlo") {
  const auto b = build_basis(1);
  GibbsParams p = gaussian(1, 2.0, 0.3);
  p.coupling = 1.0;
  p.chem_potential = calibrate_A(b, 1.0, 1000).a0;
  const auto q = ensemble_soliton(b, p.coupling, p.mass_level).q_coeffs;
  Rng rng(2);
  const auto est = estimate_shell_probability(b, p, q, 100000, rng);
  const double exact = std::log(quadrature_oracle(b, p, OracleObservable::ShellProbability));
  CHECK(std::abs(est.value - exact) <= 3 * est.std_error);
}
