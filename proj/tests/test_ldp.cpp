#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gpgibbs/errors.hpp"
#include "gpgibbs/ldp.hpp"

using namespace gpgibbs;

TEST_CASE("fit_rate on exact data") {
  std::vector<RatePoint> pts;
  for (double e : {0.5, 0.25, 0.125}) pts.push_back({e, -2.0 / e + 0.3, 0.01});
  const auto f = fit_rate(pts);
  CHECK(f.slope_c == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.intercept_b == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(f.residual <= 1e-18);

  for (auto& p : pts) p.log_value = -1.7;
  CHECK(std::abs(fit_rate(pts).slope_c) <= 1e-12);
}

TEST_CASE("fit_rate on noisy data") {
  Rng rng(17);
  std::normal_distribution<double> g(0.0, 0.05);
  int covered = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<RatePoint> pts;
    for (double e : {0.5, 0.25, 0.125, 0.0625}) pts.push_back({e, -2.0 / e + 0.3 + g(rng), 0.05});
    const auto f = fit_rate(pts);
    if (std::abs(f.slope_c - 2.0) <= 3 * f.slope_se) ++covered;
  }
  CHECK(covered >= trials * 0.95);
}

TEST_CASE("fit_rate errors") {
  CHECK_THROWS_AS((void)fit_rate({{0.1, -1, 0.1}, {0.1, -1.1, 0.1}, {0.1, -1.2, 0.1}}), ParameterError);
  CHECK_THROWS_AS((void)fit_rate({{0.1, -1, 0.1}, {0.2, -1.1, 0.1}}), ParameterError);
  CHECK_THROWS_AS((void)fit_rate({{0.0, -1, 0.1}, {0.2, -1.1, 0.1}, {0.3, -1, 0.1}}), ParameterError);
}

TEST_CASE("free energy with V = 0 is identically zero") {
  const auto b = build_basis(4);
  GibbsParams p;
  p.truncation = 4;
  p.coupling = 0;
  p.chem_potential = 0;
  ExperimentOptions o;
  o.n_samples = 2000;
  const auto rep = free_energy_experiment(b, p, {0.4, 0.2, 0.1}, o);
  CHECK(rep.passed);
  for (const auto& c : rep.cells) CHECK(c.scaled == 0.0);
  CHECK(std::abs(rep.target) <= 1e-10);
  CHECK_FALSE(rep.target_source.empty());
}

TEST_CASE("entropy control at N = 0") {
  const auto b = build_basis(0);
  GibbsParams p;
  p.truncation = 0;
  p.coupling = 0;
  p.chem_potential = 0;
  p.mass_level = 2.0;
  EntropyOptions o;
  o.n_samples = 20000;
  const auto rep = entropy_experiment(b, p, {0.2, 0.1, 0.05}, o);
  CHECK(rep.passed);
  // Nested shells: probability grows with r at fixed eps.
  for (const auto& a : rep.cells)
    for (const auto& c : rep.cells)
      if (a.epsilon == c.epsilon && a.knob < c.knob) CHECK(a.estimate.value <= c.estimate.value);
  for (const auto& f : rep.fits) CHECK(f.fit.slope_c == doctest::Approx(2.0 - f.knob).epsilon(0.02));
}

TEST_CASE("concentration edge cases") {
  const auto b = build_basis(4);
  GibbsParams p;
  p.truncation = 4;
  p.chem_potential = 0.05;
  p.mass_level = 6;
  p.shell_width = 0.3;
  ConcentrationOptions o;
  o.n_samples = 200;
  o.n_burn = 200;
  o.thin = 2;
  const auto rep = concentration_experiment(b, p, {0.2, 0.1, 0.05}, {0.0, 50.0}, o);
  for (const auto& c : rep.cells) {
    if (c.knob == 0.0) {
      CHECK_FALSE(c.censored);
      CHECK(c.estimate.value == 0.0);
    } else {
      CHECK(c.censored);
    }
  }
  for (const auto& f : rep.fits)
    if (f.knob == 0.0 && f.fitted) CHECK(std::abs(f.fit.slope_c) <= 1e-12);
}

TEST_CASE("report serialization") {
  const auto b = build_basis(0);
  GibbsParams p;
  p.truncation = 0;
  p.coupling = 0;
  p.chem_potential = 0;
  p.mass_level = 2.0;
  EntropyOptions o;
  o.n_samples = 2000;
  const auto rep = entropy_experiment(b, p, {0.2, 0.1, 0.05}, o);
  const auto j = rep.to_json();
  CHECK(j.contains("verdict"));
  CHECK(j.contains("target"));
  std::ostringstream cells, fit;
  write_cells_csv(cells, rep, "h");
  CHECK(cells.str().rfind("# h\nepsilon,knob,estimate,std_error,scaled,censored\n", 0) == 0);
  write_fit_data(fit, rep.fits.front(), "h");
  CHECK(fit.str().rfind("# h", 0) == 0);
}
