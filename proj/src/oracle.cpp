#include "gpgibbs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "gpgibbs/energy.hpp"
#include "gpgibbs/errors.hpp"

namespace gpgibbs {
namespace {

struct Rule {
  std::vector<double> x, w;
};

// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
Rule gauss_legendre(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.x[i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// Composite rule over [lo, hi] with panel boundaries forced at `breaks`.
Rule composite(double lo, double hi, std::vector<double> breaks, int panels, int points) {
  breaks.push_back(lo);
  breaks.push_back(hi);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> edges;
  for (double b : breaks) {
    if (b < lo || b > hi) continue;
    if (edges.empty() || b - edges.back() > 1e-14 * std::max(1.0, hi)) edges.push_back(b);
  }
  const Rule base = gauss_legendre(points);
  Rule out;
  const double span = hi - lo;
  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double a = edges[s], b = edges[s + 1];
    const int k = std::max(2, static_cast<int>(std::ceil(panels * (b - a) / span)));
    const double h = (b - a) / k;
    for (int p = 0; p < k; ++p) {
      const double c = a + (p + 0.5) * h;
      for (int i = 0; i < points; ++i) {
        out.x.push_back(c + 0.5 * h * base.x[i]);
        out.w.push_back(0.5 * h * base.w[i]);
      }
    }
  }
  return out;
}

}  // namespace

double oracle_expectation(const HermiteBasis& basis, const GibbsParams& params,
                          const std::function<double(const Field&)>& f, bool shell_only, const OracleGrid& grid) {
  params.validate();
  if (2 * basis.modes() > 4) {
    throw ParameterError("quadrature_oracle: real dimension 2(N+1) must be <= 4");
  }
  const double eps = params.epsilon;
  const double sigma = renorm_constant(params);
  const double lo_shell = std::max(0.0, params.mass_level - params.shell_width + sigma);
  const double hi_shell = params.mass_level + params.shell_width + sigma;

  // Radial range in u = rho^2: Gaussian cover, the shell, and the tail of the
  // Gibbs weight along each pure mode.
  double u_max = 0.0;
  for (int n = 0; n < basis.modes(); ++n) {
    const double l2 = basis.eigenvalues[n] * basis.eigenvalues[n];
    u_max += grid.sd_cover * grid.sd_cover * eps / l2;
  }
  u_max = std::max(u_max, 1.5 * hi_shell);
  for (int guard = 0; guard < 60; ++guard) {
    bool small = true;
    for (int n = 0; n < basis.modes(); ++n) {
      const Field phi = Field::unit(basis.modes(), n, std::sqrt(u_max));
      const double l2 = basis.eigenvalues[n] * basis.eigenvalues[n];
      if (-tamed_potential(basis, params, phi) / eps - l2 * u_max / eps > -45.0) small = false;
    }
    if (small) break;
    u_max *= 1.25;
  }

  double r_lo = 0.0, r_hi = std::sqrt(u_max);
  std::vector<double> breaks{std::sqrt(sigma)};
  if (shell_only) {
    r_lo = std::sqrt(lo_shell);
    r_hi = std::sqrt(hi_shell);
  } else {
    breaks.push_back(std::sqrt(lo_shell));
    breaks.push_back(std::sqrt(hi_shell));
  }
  const Rule radial = composite(r_lo, r_hi, breaks, grid.radial_panels, grid.radial_points);

  const double l0 = basis.eigenvalues[0] * basis.eigenvalues[0];
  double acc = 0.0;
  if (basis.modes() == 1) {
    for (std::size_t i = 0; i < radial.x.size(); ++i) {
      const double r = radial.x[i];
      const Field phi = Field::unit(1, 0, r);
      const double log_w = std::log(2.0 * l0 / eps) + std::log(r) - l0 * r * r / eps -
                           tamed_potential(basis, params, phi) / eps;
      if (r == 0.0) continue;
      acc += radial.w[i] * std::exp(log_w) * f(phi);
    }
    return acc;
  }

  const double l1 = basis.eigenvalues[1] * basis.eigenvalues[1];
  const Rule angle = composite(0.0, 0.5 * std::numbers::pi, {}, 1, grid.angle_points);
  const double prefactor = l0 * l1 / (std::numbers::pi * std::numbers::pi * eps * eps) * 2.0 * std::numbers::pi;
  const double dtheta = 2.0 * std::numbers::pi / grid.phase_points;
  for (std::size_t i = 0; i < radial.x.size(); ++i) {
    const double r = radial.x[i];
    if (r == 0.0) continue;
    for (std::size_t a = 0; a < angle.x.size(); ++a) {
      const double sa = std::sin(angle.x[a]), ca = std::cos(angle.x[a]);
      const double gauss = -(l0 * sa * sa + l1 * ca * ca) * r * r / eps;
      const double jac = r * r * r * sa * ca;
      for (int k = 0; k < grid.phase_points; ++k) {
        CVector c(2);
        c[0] = r * sa;
        c[1] = std::polar(r * ca, dtheta * k);
        const Field phi(std::move(c));
        const double log_w = gauss - tamed_potential(basis, params, phi) / eps;
        acc += radial.w[i] * angle.w[a] * dtheta * prefactor * jac * std::exp(log_w) * f(phi);
      }
    }
  }
  return acc;
}

double quadrature_oracle(const HermiteBasis& basis, const GibbsParams& params, OracleObservable observable,
                         const OracleGrid& grid) {
  const auto one = [](const Field&) { return 1.0; };
  const auto c0sq = [](const Field& phi) { return std::norm(phi.coeffs[0]); };
  const auto c0four = [](const Field& phi) { return std::pow(std::norm(phi.coeffs[0]), 2); };
  switch (observable) {
    case OracleObservable::Partition:
      return oracle_expectation(basis, params, one, false, grid);
    case OracleObservable::ShellMass:
      return oracle_expectation(basis, params, one, true, grid);
    case OracleObservable::ShellProbability:
      return oracle_expectation(basis, params, one, true, grid) / oracle_expectation(basis, params, one, false, grid);
    case OracleObservable::ConditionalMoment:
      return oracle_expectation(basis, params, c0sq, true, grid) / oracle_expectation(basis, params, one, true, grid);
    case OracleObservable::GrandMoment:
      return oracle_expectation(basis, params, c0sq, false, grid) /
             oracle_expectation(basis, params, one, false, grid);
    case OracleObservable::GrandSecondMoment:
      return oracle_expectation(basis, params, c0four, false, grid) /
             oracle_expectation(basis, params, one, false, grid);
  }
  throw ParameterError("quadrature_oracle: unknown observable");
}

}  // namespace gpgibbs
