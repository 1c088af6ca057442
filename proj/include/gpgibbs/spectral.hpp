#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace gpgibbs {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/**
 * Truncated eigenbasis E_N = span{h_0, ..., h_N} of the harmonic oscillator
 * L = -d^2/dx^2 + x^2, together with the quadrature grid used for every
 * nonlinear functional.
 *
 * The grid is the Gauss-Hermite rule for the weight exp(-2x^2): nodes are the
 * standard Gauss-Hermite abscissae divided by sqrt(2) and the weights are
 * stored already divided by that weight, so that
 *   int f(x) dx ~= sum_j quad_weights[j] * f(quad_nodes[j]).
 * Products of four basis functions are integrated exactly when
 * quad_size >= 2N + 1; products of two are integrated to spectral accuracy.
 */
struct HermiteBasis {
  int order = 0;               ///< N, highest retained mode index
  RVector eigenvalues;         ///< lambda_n = sqrt(1 + 2n)
  RVector quad_nodes;          ///< strictly increasing
  RVector quad_weights;        ///< strictly positive
  Eigen::MatrixXd basis_table; ///< (N+1) x quad_size, h_n(x_j)

  [[nodiscard]] int modes() const { return order + 1; }
  [[nodiscard]] Eigen::Index quad_size() const { return quad_nodes.size(); }
};

/// Field values aligned with HermiteBasis::quad_nodes.
struct GridFunction {
  CVector values;
};

/// Default rule size max(4N + 20, 40). The grid is exact for quartic
/// integrands from 2N + 1 points on, but quadratic ones (Gram matrix, analyze)
/// carry an exp(x^2) factor and need the extra nodes to reach 1e-10.
[[nodiscard]] int default_quad_size(int order);

/// Throws ParameterError when order < 0 or quad_size < 2*order + 2.
[[nodiscard]] HermiteBasis build_basis(int order, int quad_size);
[[nodiscard]] HermiteBasis build_basis(int order);

/// Normalized Hermite functions h_0..h_order at x by the three-term recurrence.
[[nodiscard]] RVector hermite_functions(int order, double x);

/// Standard Gauss-Hermite rule (weight exp(-x^2)): nodes and the scaled
/// weights w_j * exp(x_j^2), which stay representable for large |x_j|.
struct GaussHermiteRule {
  RVector nodes;
  RVector scaled_weights;
};
[[nodiscard]] GaussHermiteRule gauss_hermite_rule(int size);

[[nodiscard]] GridFunction synthesize(const HermiteBasis& basis, const CVector& coeffs);
[[nodiscard]] CVector analyze(const HermiteBasis& basis, const GridFunction& g);

/// (sum_n lambda_n^{2s} |c_n|^2)^{1/2}
[[nodiscard]] double norm_sobolev(const HermiteBasis& basis, const CVector& coeffs, double s);

/// L^p norm of the synthesized field. p in {2, 4} uses the basis grid, p = 6 a
/// dedicated rule for the weight exp(-3x^2); both are exact. Any other p >= 1
/// is evaluated on the basis grid and is only approximate.
[[nodiscard]] double norm_lp(const HermiteBasis& basis, const CVector& coeffs, double p);
[[nodiscard]] bool norm_lp_is_exact(double p);

/// ||u||_{L^4}^4 / (||u||_{H^1} ||u||_{L^2}^3). DomainError on the zero field.
[[nodiscard]] double gns_ratio(const HermiteBasis& basis, const CVector& coeffs);

/// Projection of a Gaussian bump of the given width and center onto E_N.
[[nodiscard]] CVector squeezed_gaussian(const HermiteBasis& basis, double width, double shift);

/// Empirical GNS constant: the largest gns_ratio over `probes` fields drawn
/// from a mix of randomly decaying coefficient vectors and projected squeezed
/// Gaussians (the near-extremal family). Deterministic in `seed`.
[[nodiscard]] double estimate_gns_constant(const HermiteBasis& basis, int probes, std::uint64_t seed);

}  // namespace gpgibbs
