#include "gpgibbs/fields.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "gpgibbs/errors.hpp"

namespace gpgibbs {

void GibbsParams::validate() const {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
  if (!(coupling >= 0.0)) throw ParameterError("coupling must be >= 0");
  if (!(chem_potential >= 0.0)) throw ParameterError("chem_potential must be >= 0");
  if (truncation < 0) throw ParameterError("truncation must be >= 0");
  if (!(mass_level > 0.0)) throw ParameterError("mass_level must be > 0");
  if (!(shell_width > 0.0)) throw ParameterError("shell_width must be > 0");
}

Field sample_gaussian(const HermiteBasis& basis, const GibbsParams& params, Rng& rng) {
  CVector g = standard_complex_normals(rng, basis.modes());
  const double scale = std::sqrt(params.epsilon);
  for (int n = 0; n < basis.modes(); ++n) g[n] *= scale / basis.eigenvalues[n];
  return Field(std::move(g));
}

double renorm_constant(const GibbsParams& params) {
  double acc = 0.0;
  for (int n = params.truncation; n >= 0; --n) acc += 1.0 / (1.0 + 2.0 * n);
  return params.epsilon * acc;
}

double wick_mass(const HermiteBasis&, const GibbsParams& params, const Field& phi) {
  return phi.coeffs.squaredNorm() - renorm_constant(params);
}

double gaussian_logdensity(const HermiteBasis& basis, const GibbsParams& params, const Field& phi) {
  if (phi.size() != basis.modes()) throw ParameterError("gaussian_logdensity: length mismatch");
  const double eps = params.epsilon;
  double acc = 0.0;
  for (int n = 0; n < basis.modes(); ++n) {
    const double l2 = basis.eigenvalues[n] * basis.eigenvalues[n];
    acc += std::log(l2 / (std::numbers::pi * eps)) - l2 * std::norm(phi.coeffs[n]) / eps;
  }
  return acc;
}

double h1_pairing(const HermiteBasis& basis, const Field& a, const Field& b) {
  double acc = 0.0;
  for (int n = 0; n < basis.modes(); ++n) {
    acc += basis.eigenvalues[n] * basis.eigenvalues[n] * (std::conj(a.coeffs[n]) * b.coeffs[n]).real();
  }
  return acc;
}

}  // namespace gpgibbs
