#pragma once

#include "gpgibbs/rng.hpp"
#include "gpgibbs/spectral.hpp"

namespace gpgibbs {

/// Parameters that fix one grand-canonical / mass-shell measure.
struct GibbsParams {
  double epsilon = 1.0;         ///< temperature
  double coupling = 1.0;        ///< focusing strength lambda
  double chem_potential = 0.0;  ///< A, the taming coefficient
  int truncation = 8;           ///< N
  double mass_level = 1.0;      ///< D
  double shell_width = 0.1;     ///< r

  /// Throws ParameterError on any violated positivity constraint.
  void validate() const;
};

/// A state in E_N: coordinates in the h_n basis.
struct Field {
  CVector coeffs;

  Field() = default;
  explicit Field(CVector c) : coeffs(std::move(c)) {}

  static Field zero(int modes) { return Field(CVector::Zero(modes)); }
  static Field unit(int modes, int n, Complex value = 1.0) {
    CVector c = CVector::Zero(modes);
    c[n] = value;
    return Field(std::move(c));
  }

  [[nodiscard]] Eigen::Index size() const { return coeffs.size(); }
  [[nodiscard]] bool finite() const { return coeffs.allFinite(); }
  [[nodiscard]] Field rotated(double theta) const { return Field(coeffs * std::polar(1.0, theta)); }

  Field& operator+=(const Field& o) { coeffs += o.coeffs; return *this; }
  Field& operator-=(const Field& o) { coeffs -= o.coeffs; return *this; }
  Field& operator*=(Complex s) { coeffs *= s; return *this; }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(Complex s, Field a) { return a *= s; }
};

/// Draw from mu_{eps,N}: c_n = sqrt(eps) g_n / lambda_n with E|g_n|^2 = 1.
[[nodiscard]] Field sample_gaussian(const HermiteBasis& basis, const GibbsParams& params, Rng& rng);

/// eps * sum_{n<=N} 1 / (1 + 2n): the integrated Wick counterterm.
[[nodiscard]] double renorm_constant(const GibbsParams& params);

/// M^w(phi) = ||phi||_{L^2}^2 - renorm_constant(params).
[[nodiscard]] double wick_mass(const HermiteBasis& basis, const GibbsParams& params, const Field& phi);

/// Log of the normalized density of mu_{eps,N} with respect to Lebesgue
/// measure on the coordinates (real and imaginary parts):
///   sum_n [ log(lambda_n^2 / (pi eps)) - lambda_n^2 |c_n|^2 / eps ].
[[nodiscard]] double gaussian_logdensity(const HermiteBasis& basis, const GibbsParams& params,
                                         const Field& phi);

/// Real H^1 pairing Re sum_n lambda_n^2 conj(a_n) b_n.
[[nodiscard]] double h1_pairing(const HermiteBasis& basis, const Field& a, const Field& b);

}  // namespace gpgibbs
