#include "gpgibbs/energy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gpgibbs/errors.hpp"
#include "gpgibbs/rng.hpp"
#include "gpgibbs/soliton.hpp"

namespace gpgibbs {

double mass(const HermiteBasis&, const Field& phi) { return phi.coeffs.squaredNorm(); }

double quartic_integral(const HermiteBasis& basis, const Field& phi) {
  const GridFunction g = synthesize(basis, phi.coeffs);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < g.values.size(); ++j) {
    const double m2 = std::norm(g.values[j]);
    acc += basis.quad_weights[j] * m2 * m2;
  }
  return acc;
}

EnergyBreakdown hamiltonian(const HermiteBasis& basis, const Field& phi, double coupling,
                            double chem_potential) {
  EnergyBreakdown e;
  const double h1 = norm_sobolev(basis, phi.coeffs, 1.0);
  e.kinetic_plus_trap = 0.5 * h1 * h1;
  e.quartic = 0.25 * quartic_integral(basis, phi);
  e.mass = mass(basis, phi);
  e.total_h = e.kinetic_plus_trap - coupling * e.quartic;
  e.total_hg = e.total_h + chem_potential * e.mass * e.mass * e.mass;
  return e;
}

double grand_hamiltonian(const HermiteBasis& basis, const Field& phi, double coupling, double chem_potential) {
  return hamiltonian(basis, phi, coupling, chem_potential).total_hg;
}

double tamed_potential(const HermiteBasis& basis, const GibbsParams& params, const Field& phi) {
  const double mw = std::abs(wick_mass(basis, params, phi));
  double v = params.chem_potential * mw * mw * mw;
  if (params.coupling != 0.0) v -= 0.25 * params.coupling * quartic_integral(basis, phi);
  return v;
}

Field gradient_h(const HermiteBasis& basis, const Field& phi, double coupling) {
  CVector grad(phi.size());
  for (int n = 0; n < basis.modes(); ++n) {
    grad[n] = basis.eigenvalues[n] * basis.eigenvalues[n] * phi.coeffs[n];
  }
  if (coupling != 0.0) {
    GridFunction g = synthesize(basis, phi.coeffs);
    for (Eigen::Index j = 0; j < g.values.size(); ++j) g.values[j] *= std::norm(g.values[j]);
    grad -= coupling * analyze(basis, g);
  }
  return Field(std::move(grad));
}

Field gradient_hg(const HermiteBasis& basis, const Field& phi, double coupling, double chem_potential) {
  Field grad = gradient_h(basis, phi, coupling);
  const double m = mass(basis, phi);
  grad.coeffs += (6.0 * chem_potential * m * m) * phi.coeffs;
  return grad;
}

double ensemble_rate_functional(const HermiteBasis& basis, const Field& phi, double coupling,
                                double chem_potential) {
  const double h1 = norm_sobolev(basis, phi.coeffs, 1.0);
  const double m = mass(basis, phi);
  return h1 * h1 - 0.25 * coupling * quartic_integral(basis, phi) + chem_potential * m * m * m;
}

double rate_jd(const HermiteBasis& basis, const Field& phi, double coupling, double mass_level, double i_of_d,
               double mass_tol) {
  if (mass_tol < 0.0) throw ParameterError("rate_jd: mass tolerance must be >= 0");
  if (std::abs(mass(basis, phi) - mass_level) > mass_tol) return kInfiniteRate;
  return hamiltonian(basis, phi, coupling).total_h - i_of_d;
}

Calibration calibrate_A(const HermiteBasis& basis, double coupling, int probes, const CalibrationOptions& opts) {
  if (probes < 1000) throw ParameterError("calibrate_A: at least 1000 probes required");
  if (!(coupling >= 0.0)) throw ParameterError("calibrate_A: coupling must be >= 0");
  Calibration cal;
  cal.probes = probes;
  cal.gns_constant = estimate_gns_constant(basis, std::min(probes, 10000), opts.seed);

  auto consider = [&](const Field& phi) {
    const double m = mass(basis, phi);
    if (m <= 0.0) return;
    const double h = hamiltonian(basis, phi, coupling).total_h;
    const double need = -h / (m * m * m);
    if (need > cal.required) {
      cal.required = need;
      cal.worst_mass = m;
    }
  };

  if (coupling > 0.0) {
    // Scaled-soliton family: the minimizers of H at fixed mass are the
    // hardest probes, since H(phi) >= I(M(phi)) for every phi.
    SolitonOptions sopt;
    sopt.restarts = 0;
    sopt.max_iterations = 20000;
    sopt.tolerance = 1e-7;
    const double ratio = std::log(opts.max_mass / opts.min_mass);
    for (int k = 0; k < opts.soliton_masses; ++k) {
      const double d = opts.min_mass * std::exp(ratio * k / std::max(1, opts.soliton_masses - 1));
      try {
        const SolitonResult s = minimize_constrained(basis, coupling, d, sopt);
        consider(s.q_coeffs);
        sopt.initial = s.q_coeffs;
      } catch (const SolitonError& e) {
        consider(e.best().q_coeffs);
        sopt.initial = e.best().q_coeffs;
      }
    }
  }

  // Random probes with masses spread over the same range.
  Rng rng(derive_seed(opts.seed, 1));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_lo = std::log(opts.min_mass);
  const double log_span = std::log(opts.max_mass) - log_lo;
  for (int k = 0; k < probes; ++k) {
    CVector c;
    if (k % 2 == 0) {
      c = standard_complex_normals(rng, basis.modes());
      const double decay = unit(rng);
      double f = 1.0;
      for (int n = 0; n < basis.modes(); ++n, f *= decay) c[n] *= f;
    } else {
      const double width = 0.2 + 1.3 * unit(rng);
      c = squeezed_gaussian(basis, width, 0.5 * (unit(rng) - 0.5));
    }
    const double norm = c.norm();
    if (norm == 0.0) continue;
    const double m = std::exp(log_lo + log_span * unit(rng));
    c *= std::sqrt(m) / norm;
    consider(Field(std::move(c)));
  }

  const double target = (1.0 + opts.margin) * cal.required;
  cal.a0 = target > 0.0 ? std::ceil(target / opts.grid_step - 1e-9) * opts.grid_step : 0.0;
  if (cal.a0 > opts.max_a) {
    throw DiagnosticError("calibrate_A: required A = " + std::to_string(cal.a0) + " exceeds grid maximum " +
                          std::to_string(opts.max_a));
  }
  return cal;
}

}  // namespace gpgibbs
