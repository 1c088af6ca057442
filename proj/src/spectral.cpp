#include "gpgibbs/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>
#include <string>

#include <Eigen/Eigenvalues>

#include "gpgibbs/errors.hpp"
#include "gpgibbs/rng.hpp"

namespace gpgibbs {
namespace {

// Values of h_0..h_order at x. The recurrence is run on e^{x^2/2} h_n with a
// running power-of-two rescale, so neither underflow of the Gaussian factor
// nor overflow of the polynomial part can occur for large |x|.
RVector hermite_recurrence(int order, double x) {
  RVector h(order + 1);
  const double g = -0.5 * x * x;
  int scale_exp = 0;  // values are stored as h * 2^{-scale_exp} * e^{x^2/2}
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25);
  h[0] = cur;
  std::vector<int> exps(order + 1, 0);
  for (int n = 0; n < order; ++n) {
    const double next = std::sqrt(2.0 / (n + 1)) * x * cur - std::sqrt(double(n) / (n + 1)) * prev;
    prev = cur;
    cur = next;
    if (std::abs(cur) > 1e100) {
      int e = 0;
      std::frexp(cur, &e);
      cur = std::ldexp(cur, -e);
      prev = std::ldexp(prev, -e);
      scale_exp += e;
    }
    h[n + 1] = cur;
    exps[n + 1] = scale_exp;
  }
  for (int n = 0; n <= order; ++n) {
    // back out the pending rescales applied after index n was stored
    h[n] = std::exp(g + exps[n] * std::numbers::ln2) * h[n];
  }
  return h;
}

}  // namespace

RVector hermite_functions(int order, double x) {
  if (order < 0) throw ParameterError("hermite_functions: negative order");
  return hermite_recurrence(order, x);
}

int default_quad_size(int order) { return std::max(4 * order + 20, 40); }

GaussHermiteRule gauss_hermite_rule(int size) {
  if (size < 1) throw ParameterError("gauss_hermite_rule: size must be positive");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(size, size);
  for (int k = 1; k < size; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
  RVector nodes = solver.eigenvalues();

  GaussHermiteRule rule;
  rule.nodes.resize(size);
  rule.scaled_weights.resize(size);
  for (int j = 0; j < size; ++j) {
    double y = nodes[j];
    // Newton polish on h_size(y) = 0.
    for (int it = 0; it < 3; ++it) {
      const RVector h = hermite_recurrence(size, y);
      const double deriv = std::sqrt(2.0 * size) * h[size - 1] - y * h[size];
      if (deriv == 0.0) break;
      y -= h[size] / deriv;
    }
    const RVector h = hermite_recurrence(size - 1, y);
    rule.nodes[j] = y;
    rule.scaled_weights[j] = 1.0 / h.squaredNorm();
  }
  // Enforce exact antisymmetry of the rule.
  for (int j = 0; j < size / 2; ++j) {
    const int k = size - 1 - j;
    const double y = 0.5 * (rule.nodes[k] - rule.nodes[j]);
    const double w = 0.5 * (rule.scaled_weights[k] + rule.scaled_weights[j]);
    rule.nodes[j] = -y;
    rule.nodes[k] = y;
    rule.scaled_weights[j] = rule.scaled_weights[k] = w;
  }
  if (size % 2 == 1) rule.nodes[size / 2] = 0.0;
  return rule;
}

namespace {

// Rule for integrands of the form poly(x) * exp(-k x^2), with weights folded.
void scaled_rule(int size, double k, RVector& nodes, RVector& weights) {
  const GaussHermiteRule rule = gauss_hermite_rule(size);
  const double s = std::sqrt(k);
  nodes = rule.nodes / s;
  weights = rule.scaled_weights / s;
}

Eigen::MatrixXd tabulate(int order, const RVector& nodes) {
  Eigen::MatrixXd table(order + 1, nodes.size());
  for (Eigen::Index j = 0; j < nodes.size(); ++j) table.col(j) = hermite_recurrence(order, nodes[j]);
  return table;
}

void check_length(const HermiteBasis& basis, Eigen::Index n, const char* who) {
  if (n != basis.modes()) {
    throw ParameterError(std::string(who) + ": expected " + std::to_string(basis.modes()) +
                         " coefficients, got " + std::to_string(n));
  }
}

}  // namespace

HermiteBasis build_basis(int order, int quad_size) {
  if (order < 0) throw ParameterError("build_basis: order must be >= 0");
  if (quad_size < 2 * order + 2) {
    throw ParameterError("build_basis: quad_size must be >= 2N + 2 (got " +
                         std::to_string(quad_size) + " for N = " + std::to_string(order) + ")");
  }
  HermiteBasis basis;
  basis.order = order;
  basis.eigenvalues.resize(order + 1);
  for (int n = 0; n <= order; ++n) basis.eigenvalues[n] = std::sqrt(1.0 + 2.0 * n);
  scaled_rule(quad_size, 2.0, basis.quad_nodes, basis.quad_weights);
  basis.basis_table = tabulate(order, basis.quad_nodes);
  return basis;
}

HermiteBasis build_basis(int order) { return build_basis(order, default_quad_size(order)); }

GridFunction synthesize(const HermiteBasis& basis, const CVector& coeffs) {
  check_length(basis, coeffs.size(), "synthesize");
  const RVector re = basis.basis_table.transpose() * coeffs.real();
  const RVector im = basis.basis_table.transpose() * coeffs.imag();
  GridFunction g{CVector(re.size())};
  g.values.real() = re;
  g.values.imag() = im;
  return g;
}

CVector analyze(const HermiteBasis& basis, const GridFunction& g) {
  if (g.values.size() != basis.quad_size()) {
    throw ParameterError("analyze: grid function does not match the quadrature grid");
  }
  const RVector re = basis.basis_table * g.values.real().cwiseProduct(basis.quad_weights);
  const RVector im = basis.basis_table * g.values.imag().cwiseProduct(basis.quad_weights);
  CVector c(re.size());
  c.real() = re;
  c.imag() = im;
  return c;
}

double norm_sobolev(const HermiteBasis& basis, const CVector& coeffs, double s) {
  check_length(basis, coeffs.size(), "norm_sobolev");
  double acc = 0.0;
  for (int n = 0; n < basis.modes(); ++n) {
    acc += std::pow(basis.eigenvalues[n], 2.0 * s) * std::norm(coeffs[n]);
  }
  return std::sqrt(acc);
}

bool norm_lp_is_exact(double p) { return p == 2.0 || p == 4.0 || p == 6.0; }

double norm_lp(const HermiteBasis& basis, const CVector& coeffs, double p) {
  if (!(p >= 1.0)) throw ParameterError("norm_lp: p must be >= 1");
  check_length(basis, coeffs.size(), "norm_lp");
  if (p == 6.0) {
    RVector nodes, weights;
    scaled_rule(std::max(3 * basis.order + 1, 2), 3.0, nodes, weights);
    const CVector values = tabulate(basis.order, nodes).transpose().cast<Complex>() * coeffs;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < values.size(); ++j) acc += weights[j] * std::pow(std::norm(values[j]), 3);
    return std::pow(acc, 1.0 / 6.0);
  }
  const GridFunction g = synthesize(basis, coeffs);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < g.values.size(); ++j) {
    const double m2 = std::norm(g.values[j]);
    if (p == 2.0) {
      acc += basis.quad_weights[j] * m2;
    } else if (p == 4.0) {
      acc += basis.quad_weights[j] * m2 * m2;
    } else {
      acc += basis.quad_weights[j] * std::pow(m2, 0.5 * p);
    }
  }
  return std::pow(acc, 1.0 / p);
}

double gns_ratio(const HermiteBasis& basis, const CVector& coeffs) {
  const double l2 = norm_sobolev(basis, coeffs, 0.0);
  if (l2 == 0.0) throw DomainError("gns_ratio: zero field");
  const double h1 = norm_sobolev(basis, coeffs, 1.0);
  const double l4 = norm_lp(basis, coeffs, 4.0);
  return std::pow(l4, 4) / (h1 * l2 * l2 * l2);
}

CVector squeezed_gaussian(const HermiteBasis& basis, double width, double shift) {
  if (!(width > 0.0)) throw ParameterError("squeezed_gaussian: width must be positive");
  // Projection of exp(-(x - shift)^2 / (2 width^2)) onto E_N by the trapezoid
  // rule, which is spectrally accurate for this rapidly decaying integrand.
  const double step = std::min(width / 6.0, 0.05);
  const double half = std::abs(shift) + 12.0;
  const int points = static_cast<int>(std::ceil(2.0 * half / step));
  CVector coeffs = CVector::Zero(basis.modes());
  for (int j = 0; j <= points; ++j) {
    const double x = -half + j * (2.0 * half / points);
    const double dx = (x - shift) / width;
    const double f = std::exp(-0.5 * dx * dx);
    if (f < 1e-300) continue;
    const RVector h = hermite_recurrence(basis.order, x);
    for (int n = 0; n < basis.modes(); ++n) coeffs[n] += f * h[n];
  }
  return coeffs * (2.0 * half / points);
}

double estimate_gns_constant(const HermiteBasis& basis, int probes, std::uint64_t seed) {
  if (probes < 1) throw ParameterError("estimate_gns_constant: probes must be positive");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double best = 0.0;
  for (int k = 0; k < probes; ++k) {
    CVector c;
    if (k % 2 == 0) {
      const double decay = unit(rng);
      c = standard_complex_normals(rng, basis.modes());
      double f = 1.0;
      for (int n = 0; n < basis.modes(); ++n, f *= decay) c[n] *= f;
    } else {
      const double width = std::exp(std::log(0.15) + unit(rng) * std::log(2.0 / 0.15));
      const double shift = 2.0 * (unit(rng) - 0.5);
      c = squeezed_gaussian(basis, width, shift);
    }
    if (c.norm() == 0.0) continue;
    best = std::max(best, gns_ratio(basis, c));
  }
  return best;
}

}  // namespace gpgibbs
