#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gpgibbs/energy.hpp"
#include "gpgibbs/errors.hpp"
#include "gpgibbs/soliton.hpp"
#include "helpers.hpp"

using namespace gpgibbs;

namespace {
const double kH0Quartic = 1.0 / std::sqrt(2 * std::numbers::pi);
}

TEST_CASE("linear ground state") {
  const auto b = build_basis(8);
  const auto r = minimize_constrained(b, 0.0, 2.0);
  CHECK(r.converged);
  CHECK(r.energy == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((r.q_coeffs.coeffs - Field::unit(9, 0, std::sqrt(2.0)).coeffs).norm() <= 1e-6);
}

TEST_CASE("weak coupling matches first-order perturbation") {
  const auto b = build_basis(16);
  const auto r = minimize_constrained(b, 0.01, 1.0);
  CHECK(r.converged);
  CHECK(std::abs(r.energy - (0.5 - 0.01 * kH0Quartic / 4)) <= 1e-4);
  CHECK((r.q_coeffs.coeffs - Field::unit(17, 0).coeffs).norm() <= 0.05);
  CHECK(std::abs(mass(b, r.q_coeffs) - 1.0) <= 1e-10);
  CHECK(r.q_coeffs.coeffs[0].imag() == 0.0);
  CHECK(r.q_coeffs.coeffs[0].real() >= 0.0);
}

TEST_CASE("I(D) is non-increasing in the coupling and energy descends") {
  const auto b = build_basis(8);
  SolitonOptions opts;
  opts.record_trace = true;
  double prev = 1e300;
  for (double lam : {0.0, 0.5, 1.0}) {
    const auto r = minimize_constrained(b, lam, 3.0, opts);
    CHECK(r.energy <= prev + 1e-12);
    prev = r.energy;
    for (std::size_t i = 1; i < r.energy_trace.size(); ++i)
      CHECK(r.energy_trace[i] <= r.energy_trace[i - 1] + 1e-12 * std::max(1.0, std::abs(r.energy_trace[i])));
  }
}

TEST_CASE("gauge fixing is deterministic across rotated starts") {
  const auto b = build_basis(8);
  SolitonOptions a, c;
  a.restarts = c.restarts = 0;
  const Field start = Field::unit(9, 0, std::sqrt(6.0)) + testing::random_field(9, 2, 0.2);
  a.initial = start;
  c.initial = start.rotated(2.2);
  const auto ra = minimize_constrained(b, 1.0, 6.0, a);
  const auto rc = minimize_constrained(b, 1.0, 6.0, c);
  CHECK((ra.q_coeffs.coeffs - rc.q_coeffs.coeffs).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(std::abs(gauge_fix(start.rotated(1.0)).coeffs[0].imag()) < 1e-14);
}

TEST_CASE("constrained minimizer rejects bad input") {
  const auto b = build_basis(4);
  CHECK_THROWS_AS((void)minimize_constrained(b, 1.0, 0.0), ParameterError);
  SolitonOptions o;
  o.initial = Field::zero(3);
  CHECK_THROWS_AS((void)minimize_constrained(b, 1.0, 1.0, o), ParameterError);
  SolitonOptions tight;
  tight.max_iterations = 2;
  tight.restarts = 0;
  CHECK_THROWS_AS((void)minimize_constrained(b, 1.0, 6.0, tight), SolitonError);
}

TEST_CASE("mass threshold scan") {
  const auto b = build_basis(16);
  const std::vector<double> grid{1, 2, 3, 4, 4.5, 4.75, 5, 5.1, 5.5, 6};
  const auto s = scan_mass_threshold(b, 1.0, grid);
  CHECK(s.d_star <= 5.1);
  REQUIRE(s.rows.size() == grid.size());
  for (const auto& row : s.rows) {
    CHECK(row.energy <= row.mass_level / 2 + 1e-12);
    CHECK(row.energy <= row.competitor_bound + 1e-10);
    CHECK(row.competitor_bound ==
          doctest::Approx(row.mass_level / 2 - row.mass_level * row.mass_level * kH0Quartic / 4));
  }
  CHECK(scan_mass_threshold(b, 0.0, {1, 2, 4, 8}).d_star == kInfiniteRate);
  CHECK_THROWS_AS((void)scan_mass_threshold(b, 1.0, {2, 1}), ParameterError);
}

TEST_CASE("unconstrained minimization of H^G") {
  const auto b = build_basis(8);
  UnconstrainedOptions o;
  o.record_trace = true;
  const auto r = minimize_unconstrained_hg(b, 1.0, 1.0, o);
  CHECK(r.field.coeffs.norm() <= 1e-6);
  CHECK(std::abs(r.objective) <= 1e-10);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);

  UnconstrainedOptions bad;
  bad.initial = Field::unit(9, 0, 3.0);
  CHECK(grand_hamiltonian(b, *bad.initial, 1.0, 0.0) < 0.0);
  CHECK_THROWS_AS((void)minimize_unconstrained_hg(b, 1.0, 0.0, bad), DiagnosticError);
}

TEST_CASE("orbit distance") {
  const auto b = build_basis(8);
  const auto sol = minimize_constrained(b, 1.0, 6.0);
  const Field& q = sol.q_coeffs;
  for (double p : {2.0, 4.0, 3.0}) {
    const auto o = orbit_distance(b, q.rotated(1.3), q, p);
    CHECK(o.distance <= 1e-10);
    CHECK(o.theta_star == doctest::Approx(1.3).epsilon(1e-6));
  }

  // Unit direction orthogonal to Q in the complex L^2 pairing.
  const double alpha = 0.37;
  CVector psi = testing::random_field(9, 41).coeffs;
  psi -= (q.coeffs.dot(psi) / q.coeffs.squaredNorm()) * q.coeffs;
  psi /= psi.norm();
  const auto o2 = orbit_distance(b, q + Field(alpha * psi), q, 2.0);
  CHECK(o2.distance == doctest::Approx(alpha).epsilon(1e-10));

  // p = 4 against an exhaustive phase grid.
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Field phi = q.rotated(0.4 * s) + testing::random_field(9, 700 + s, 0.8);
    const auto o4 = orbit_distance(b, phi, q, 4.0);
    // Exhaustive 4096-point grid, then a second 4096-point grid across the
    // winning cell so the oracle itself is accurate well below 1e-6.
    const double h = 2 * std::numbers::pi / 4096;
    double best = 1e300, arg = 0;
    for (int k = 0; k < 4096; ++k) {
      const double v = norm_lp(b, (phi - q.rotated(h * k)).coeffs, 4.0);
      if (v < best) best = v, arg = h * k;
    }
    for (int k = -2048; k <= 2048; ++k)
      best = std::min(best, norm_lp(b, (phi - q.rotated(arg + h * k / 2048.0)).coeffs, 4.0));
    CHECK(o4.distance <= best + 1e-6);
    CHECK(o4.distance >= best - 1e-6);
    CHECK(o4.distance <= norm_lp(b, (phi - q).coeffs, 4.0) + 1e-12);
  }
  CHECK_THROWS_AS((void)orbit_distance(b, q, q, 0.5), ParameterError);
}

TEST_CASE("energy gap away from the orbit") {
  const auto b = build_basis(8);
  const double d = 6.0;
  const auto sol = minimize_constrained(b, 1.0, d);
  double margin_small = 1e300, margin_large = 1e300;
  for (std::uint64_t s = 0; s < 400; ++s) {
    Field f = sol.q_coeffs + testing::random_field(9, 3000 + s, 0.05 + 0.002 * s);
    f *= std::sqrt(d / mass(b, f));
    const double dist = orbit_distance(b, f, sol.q_coeffs, 4.0).distance;
    const double gap = hamiltonian(b, f, 1.0).total_h - sol.energy;
    if (dist >= 0.2) margin_small = std::min(margin_small, gap);
    if (dist >= 0.5) margin_large = std::min(margin_large, gap);
  }
  CHECK(margin_small > 0);
  CHECK(margin_large < 1e300);
  CHECK(margin_large >= margin_small);
}
