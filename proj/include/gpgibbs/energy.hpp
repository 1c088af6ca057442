#pragma once

#include <cstdint>
#include <limits>

#include "gpgibbs/fields.hpp"
#include "gpgibbs/spectral.hpp"

namespace gpgibbs {

/// Terms of H and H^G for one field.
struct EnergyBreakdown {
  double kinetic_plus_trap = 0.0;  ///< 1/2 ||phi||_{H^1}^2
  double quartic = 0.0;            ///< 1/4 ||phi||_{L^4}^4
  double mass = 0.0;               ///< ||phi||_{L^2}^2
  double total_h = 0.0;            ///< kinetic_plus_trap - coupling * quartic
  double total_hg = 0.0;           ///< total_h + A * mass^3
};

inline constexpr double kInfiniteRate = std::numeric_limits<double>::infinity();

[[nodiscard]] double mass(const HermiteBasis& basis, const Field& phi);

/// int |phi|^4 dx, exact on E_N.
[[nodiscard]] double quartic_integral(const HermiteBasis& basis, const Field& phi);

[[nodiscard]] EnergyBreakdown hamiltonian(const HermiteBasis& basis, const Field& phi, double coupling,
                                          double chem_potential = 0.0);

/// H(phi) + A M(phi)^3.
[[nodiscard]] double grand_hamiltonian(const HermiteBasis& basis, const Field& phi, double coupling,
                                       double chem_potential);

/// V(phi) = -(coupling/4) ||phi||_{L^4}^4 + A |M^w(phi)|^3.
[[nodiscard]] double tamed_potential(const HermiteBasis& basis, const GibbsParams& params, const Field& phi);

/// Coefficients of L phi - coupling P_N(|phi|^2 phi): the gradient of H for the
/// real L^2 pairing, H(phi + t psi) = H(phi) + t Re<grad, psi> + O(t^2).
[[nodiscard]] Field gradient_h(const HermiteBasis& basis, const Field& phi, double coupling);

/// Gradient of H^G for the same pairing: gradient_h + 6 A M^2 phi.
[[nodiscard]] Field gradient_hg(const HermiteBasis& basis, const Field& phi, double coupling,
                                double chem_potential);

/// Large-deviation functional of exp(-V/eps) mu_eps in the limit eps -> 0:
/// ||phi||_{H^1}^2 - (coupling/4) ||phi||_{L^4}^4 + A M^3. Because the
/// reference Gaussian has E|c_n|^2 = eps / lambda_n^2, its Cameron-Martin cost
/// is ||phi||_{H^1}^2, so this equals 2 H^G(phi) at (coupling/2, A/2).
[[nodiscard]] double ensemble_rate_functional(const HermiteBasis& basis, const Field& phi, double coupling,
                                              double chem_potential);

/// H(phi) - i_of_d when |M(phi) - D| <= mass_tol, +infinity otherwise.
[[nodiscard]] double rate_jd(const HermiteBasis& basis, const Field& phi, double coupling, double mass_level,
                             double i_of_d, double mass_tol);

struct CalibrationOptions {
  double margin = 0.1;           ///< relative safety margin on the probe bound
  double grid_step = 1e-3;       ///< A is reported on multiples of this step
  double max_a = 10.0;           ///< calibration fails above this value
  int soliton_masses = 48;       ///< masses in the scaled-soliton family
  double min_mass = 0.25;
  double max_mass = 400.0;
  std::uint64_t seed = 20240611;
};

struct Calibration {
  double a0 = 0.0;               ///< smallest grid A making H^G >= 0 on all probes
  double required = 0.0;         ///< max over probes of -H / M^3 (no margin)
  double worst_mass = 0.0;       ///< probe mass attaining `required`
  double gns_constant = 0.0;     ///< empirical GNS constant on this basis
  int probes = 0;
};

/// Empirical coercivity threshold A_0 for H^G. DiagnosticError when no grid
/// value up to max_a suffices.
[[nodiscard]] Calibration calibrate_A(const HermiteBasis& basis, double coupling, int probes,
                                      const CalibrationOptions& opts = {});

}  // namespace gpgibbs
