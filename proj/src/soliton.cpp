#include "gpgibbs/soliton.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "gpgibbs/parallel.hpp"
#include "gpgibbs/rng.hpp"

namespace gpgibbs {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Field rescale_to_mass(const Field& phi, double target) {
  const double m = phi.coeffs.squaredNorm();
  return Field(phi.coeffs * std::sqrt(target / m));
}

Field tangential(const Field& grad, const Field& phi) {
  const double m = phi.coeffs.squaredNorm();
  const double normal = phi.coeffs.dot(grad.coeffs).real() / m;  // dot conjugates its first argument
  return Field(grad.coeffs - normal * phi.coeffs);
}

bool lexicographically_less(const Field& a, const Field& b) {
  for (Eigen::Index n = 0; n < a.size(); ++n) {
    if (a.coeffs[n].real() != b.coeffs[n].real()) return a.coeffs[n].real() < b.coeffs[n].real();
    if (a.coeffs[n].imag() != b.coeffs[n].imag()) return a.coeffs[n].imag() < b.coeffs[n].imag();
  }
  return false;
}

SolitonResult flow_from(const HermiteBasis& basis, double coupling, double mass_level, Field start,
                        const SolitonOptions& opts) {
  SolitonResult res;
  Field phi = rescale_to_mass(start, mass_level);
  double energy = hamiltonian(basis, phi, coupling).total_h;
  double step = opts.initial_step;
  if (opts.record_trace) res.energy_trace.push_back(energy);

  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    const Field grad = tangential(gradient_h(basis, phi, coupling), phi);
    const double gnorm2 = grad.coeffs.squaredNorm();
    res.grad_residual = std::sqrt(gnorm2);
    if (res.grad_residual <= opts.tolerance * std::max(1.0, std::abs(energy))) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    // Below this the Armijo decrease is invisible in the energy; there a step
    // is taken when the energy stays flat and the gradient shrinks.
    const double resolution = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(energy));
    while (step > 1e-14) {
      Field trial = rescale_to_mass(Field(phi.coeffs - step * grad.coeffs), mass_level);
      const double e_trial = hamiltonian(basis, trial, coupling).total_h;
      bool ok = e_trial <= energy - 1e-4 * step * gnorm2;
      if (!ok && 1e-4 * step * gnorm2 < resolution && e_trial <= energy + resolution) {
        ok = tangential(gradient_h(basis, trial, coupling), trial).coeffs.squaredNorm() < gnorm2;
      }
      if (ok) {
        phi = std::move(trial);
        energy = e_trial;
        step = std::min(step * 1.5, 10.0);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (opts.record_trace && accepted) res.energy_trace.push_back(energy);
    if (!accepted) {
      // Line search stalled at round-off level: accept when the energy is
      // flat to machine precision.
      res.converged = res.grad_residual <= std::sqrt(opts.tolerance) * std::max(1.0, std::abs(energy));
      break;
    }
  }
  res.iterations = it;
  res.q_coeffs = gauge_fix(phi);
  res.energy = hamiltonian(basis, res.q_coeffs, coupling).total_h;
  res.mass_residual = std::abs(mass(basis, res.q_coeffs) - mass_level);
  return res;
}

}  // namespace

Field gauge_fix(const Field& phi) {
  const double scale = phi.coeffs.norm();
  if (scale == 0.0) return phi;
  for (Eigen::Index n = 0; n < phi.size(); ++n) {
    const double a = std::abs(phi.coeffs[n]);
    if (a > 1e-10 * scale) {
      Field out(phi.coeffs * std::polar(1.0, -std::arg(phi.coeffs[n])));
      out.coeffs[n] = Complex(a, 0.0);
      return out;
    }
  }
  return phi;
}

SolitonResult minimize_constrained(const HermiteBasis& basis, double coupling, double mass_level,
                                   const SolitonOptions& opts) {
  if (!(mass_level > 0.0)) throw ParameterError("minimize_constrained: D must be > 0");
  if (opts.restarts < 0 || opts.max_iterations < 1) throw ParameterError("minimize_constrained: bad options");
  const int modes = basis.modes();
  Field base = opts.initial ? *opts.initial : Field::unit(modes, 0, std::sqrt(mass_level));
  if (base.size() != modes) throw ParameterError("minimize_constrained: initial guess has wrong length");
  if (base.coeffs.squaredNorm() == 0.0) base = Field::unit(modes, 0, std::sqrt(mass_level));
  base = rescale_to_mass(base, mass_level);

  // Perturbations are co-rotated with the base start so that the whole
  // procedure is equivariant under a global phase.
  const Complex phase = std::abs(base.coeffs[0]) > 0.0 ? base.coeffs[0] / std::abs(base.coeffs[0]) : 1.0;
  std::vector<Field> starts{base};
  for (int k = 0; k < opts.restarts; ++k) {
    Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
    CVector p = standard_complex_normals(rng, modes);
    for (int n = 0; n < modes; ++n) p[n] /= basis.eigenvalues[n];
    p *= phase * opts.perturbation * std::sqrt(mass_level) / std::max(p.norm(), 1e-300);
    starts.emplace_back(base.coeffs + p);
  }

  std::vector<SolitonResult> results(starts.size());
  parallel_for(static_cast<int>(starts.size()), opts.threads, [&](int i) {
    results[i] = flow_from(basis, coupling, mass_level, starts[i], opts);
  });

  const SolitonResult* best = nullptr;
  const SolitonResult* best_any = &results[0];
  for (const auto& r : results) {
    if (r.energy < best_any->energy) best_any = &r;
    if (!r.converged) continue;
    if (!best || r.energy < best->energy - 1e-12 ||
        (std::abs(r.energy - best->energy) <= 1e-12 && lexicographically_less(r.q_coeffs, best->q_coeffs))) {
      best = &r;
    }
  }
  if (!best) {
    throw SolitonError("minimize_constrained: no restart converged (best grad residual " +
                           std::to_string(best_any->grad_residual) + ")",
                       *best_any);
  }
  return *best;
}

ThresholdScan scan_mass_threshold(const HermiteBasis& basis, double coupling, const std::vector<double>& d_grid,
                                  const SolitonOptions& opts) {
  for (std::size_t i = 1; i < d_grid.size(); ++i) {
    if (!(d_grid[i] > d_grid[i - 1])) throw ParameterError("scan_mass_threshold: grid must be increasing");
  }
  ThresholdScan scan;
  SolitonOptions o = opts;
  const double quartic_h0 = 1.0 / std::sqrt(kTwoPi);
  for (double d : d_grid) {
    ThresholdRow row;
    row.mass_level = d;
    row.competitor_bound = 0.5 * d - 0.25 * coupling * d * d * quartic_h0;
    SolitonResult s;
    try {
      s = minimize_constrained(basis, coupling, d, o);
    } catch (const SolitonError& e) {
      s = e.best();
    }
    row.energy = s.energy;
    row.converged = s.converged;
    o.initial = s.q_coeffs;
    if (row.energy < 0.0 && scan.d_star == kInfiniteRate) scan.d_star = d;
    scan.rows.push_back(row);
  }
  return scan;
}

UnconstrainedResult minimize_unconstrained_hg(const HermiteBasis& basis, double coupling, double chem_potential,
                                              const UnconstrainedOptions& opts) {
  const int modes = basis.modes();
  std::vector<Field> starts;
  if (opts.initial) {
    if (opts.initial->size() != modes) throw ParameterError("minimize_unconstrained_hg: wrong start length");
    starts.push_back(*opts.initial);
  } else {
    for (int k = 0; k < std::max(1, opts.starts); ++k) {
      Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(k)));
      CVector c = standard_complex_normals(rng, modes);
      c *= opts.start_scale / c.norm();
      starts.emplace_back(std::move(c));
    }
  }

  UnconstrainedResult worst;
  bool have = false;
  for (const Field& start : starts) {
    UnconstrainedResult res;
    Field phi = start;
    double obj = grand_hamiltonian(basis, phi, coupling, chem_potential);
    double step = opts.initial_step;
    if (opts.record_trace) res.objective_trace.push_back(obj);
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
      if (obj < -1e-10) {
        throw DiagnosticError("minimize_unconstrained_hg: objective " + std::to_string(obj) +
                              " < 0; A is below the coercivity threshold");
      }
      const Field grad = gradient_hg(basis, phi, coupling, chem_potential);
      const double g2 = grad.coeffs.squaredNorm();
      if (std::sqrt(g2) <= opts.gradient_tolerance) break;
      bool accepted = false;
      while (step > 1e-16) {
        Field trial(phi.coeffs - step * grad.coeffs);
        const double o = grand_hamiltonian(basis, trial, coupling, chem_potential);
        if (o <= obj - 1e-4 * step * g2) {
          phi = std::move(trial);
          obj = o;
          step = std::min(step * 1.5, 10.0);
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (opts.record_trace && accepted) res.objective_trace.push_back(obj);
      if (!accepted) break;
    }
    res.field = phi;
    res.objective = obj;
    res.iterations = it;
    const double norm = phi.coeffs.norm();
    if (norm > 1e-6 || obj > 1e-10) {
      throw DiagnosticError("minimize_unconstrained_hg: converged to a nonzero point (L2 norm " +
                            std::to_string(norm) + ", objective " + std::to_string(obj) + ")");
    }
    if (!have || res.objective > worst.objective) {
      worst = std::move(res);
      have = true;
    }
  }
  return worst;
}

namespace {

double golden_section(const std::function<double(double)>& f, double lo, double hi) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - invphi * (hi - lo);
  double x2 = lo + invphi * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - invphi * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + invphi * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

OrbitDistance orbit_distance(const HermiteBasis& basis, const Field& phi, const Field& q, double p) {
  if (!(p >= 1.0)) throw ParameterError("orbit_distance: p must be >= 1");
  OrbitDistance out;
  out.p = p;
  auto wrap = [](double t) {
    t = std::fmod(t, kTwoPi);
    return t < 0.0 ? t + kTwoPi : t;
  };
  if (p == 2.0) {
    const Complex overlap = q.coeffs.dot(phi.coeffs);
    out.theta_star = overlap == Complex(0.0) ? 0.0 : wrap(std::arg(overlap));
    out.distance = (phi.coeffs - std::polar(1.0, out.theta_star) * q.coeffs).norm();
    return out;
  }

  std::function<double(double)> dist;
  GridFunction a, b;
  if (p == 6.0) {
    dist = [&](double t) { return norm_lp(basis, phi.coeffs - std::polar(1.0, t) * q.coeffs, p); };
  } else if (p == 4.0) {
    // |a - e^{it} b|^4 is a trigonometric polynomial of degree 2 in t.
    a = synthesize(basis, phi.coeffs);
    b = synthesize(basis, q.coeffs);
    double c0 = 0.0;
    Complex c1 = 0.0, c2 = 0.0;
    for (Eigen::Index j = 0; j < a.values.size(); ++j) {
      const double w = basis.quad_weights[j];
      const double u = std::norm(a.values[j]) + std::norm(b.values[j]);
      const Complex v = std::conj(a.values[j]) * b.values[j];
      c0 += w * (u * u + 2.0 * std::norm(v));
      c1 += w * u * v;
      c2 += w * v * v;
    }
    dist = [=](double t) {
      const Complex e = std::polar(1.0, t);
      const double f = c0 - 4.0 * std::real(e * c1) + 2.0 * std::real(e * e * c2);
      return std::sqrt(std::sqrt(std::max(f, 0.0)));
    };
  } else {
    a = synthesize(basis, phi.coeffs);
    b = synthesize(basis, q.coeffs);
    dist = [&](double t) {
      const Complex rot = std::polar(1.0, t);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < a.values.size(); ++j) {
        acc += basis.quad_weights[j] * std::pow(std::abs(a.values[j] - rot * b.values[j]), p);
      }
      return std::pow(acc, 1.0 / p);
    };
  }

  constexpr int kScan = 64;
  int best = 0;
  double best_val = dist(0.0);
  for (int k = 1; k < kScan; ++k) {
    const double v = dist(kTwoPi * k / kScan);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  double theta = golden_section(dist, kTwoPi * (best - 1) / kScan, kTwoPi * (best + 1) / kScan);
  double val = dist(theta);
  if (best_val < val) {
    theta = kTwoPi * best / kScan;
    val = best_val;
  }
  if (p == 4.0) {
    // The expanded polynomial cancels badly near the orbit (f ~ d^4), which
    // limits theta to about 1e-4 there; polish on the unexpanded integrand.
    auto direct = [&](double t) {
      const Complex rot = std::polar(1.0, t);
      double acc = 0.0;
      for (Eigen::Index j = 0; j < a.values.size(); ++j) {
        acc += basis.quad_weights[j] * std::pow(std::norm(a.values[j] - rot * b.values[j]), 2);
      }
      return std::sqrt(std::sqrt(acc));
    };
    const double refined = golden_section(direct, theta - 1e-2, theta + 1e-2);
    const double a0 = direct(theta), a1 = direct(refined);
    if (a1 <= a0) {
      theta = refined;
      val = a1;
    } else {
      val = a0;
    }
  }
  out.theta_star = wrap(theta);
  out.distance = val;
  return out;
}

}  // namespace gpgibbs
