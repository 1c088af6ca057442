#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gpgibbs/energy.hpp"
#include "gpgibbs/errors.hpp"

namespace gpgibbs {

struct SolitonOptions {
  double initial_step = 0.05;
  double tolerance = 1e-8;        ///< grad_residual <= tolerance * max(1, |I|)
  int max_iterations = 100000;
  int restarts = 5;               ///< perturbed restarts in addition to the base start
  double perturbation = 0.3;      ///< relative size of restart perturbations
  std::uint64_t seed = 7;
  int threads = 1;
  bool record_trace = false;
  std::optional<Field> initial;   ///< replaces sqrt(D) h_0 as the base start
};

/// Gauge-fixed minimizer of H on {M = D} and its diagnostics.
struct SolitonResult {
  Field q_coeffs;
  double energy = 0.0;            ///< I(D)
  double mass_residual = 0.0;
  double grad_residual = 0.0;     ///< norm of the tangential gradient
  int iterations = 0;
  bool converged = false;
  std::vector<double> energy_trace;  ///< accepted energies, when requested
};

class SolitonError : public DiagnosticError {
 public:
  SolitonError(const std::string& what, SolitonResult best)
      : DiagnosticError(what), best_(std::move(best)) {}
  [[nodiscard]] const SolitonResult& best() const { return best_; }

 private:
  SolitonResult best_;
};

/// Rotates phi by a global phase so that its first non-negligible coefficient
/// is real and nonnegative.
[[nodiscard]] Field gauge_fix(const Field& phi);

/// I(D) = inf{H : M = D} by normalized gradient flow with backtracking,
/// from sqrt(D) h_0 and `restarts` perturbed starts. Lowest energy wins; ties
/// within 1e-12 go to the lexicographically smaller gauge-fixed coefficients.
[[nodiscard]] SolitonResult minimize_constrained(const HermiteBasis& basis, double coupling, double mass_level,
                                                 const SolitonOptions& opts = {});

struct ThresholdRow {
  double mass_level = 0.0;
  double energy = 0.0;            ///< I(D)
  double competitor_bound = 0.0;  ///< H(sqrt(D) h_0) = D/2 - coupling D^2 / (4 sqrt(2 pi))
  bool converged = false;
};

struct ThresholdScan {
  double d_star = kInfiniteRate;  ///< smallest grid D with I(D) < 0, +inf if none
  std::vector<ThresholdRow> rows;
};

/// Empirical D*: scans an increasing mass grid with warm starts.
[[nodiscard]] ThresholdScan scan_mass_threshold(const HermiteBasis& basis, double coupling,
                                                const std::vector<double>& d_grid,
                                                const SolitonOptions& opts = {});

struct UnconstrainedOptions {
  double initial_step = 0.05;
  double gradient_tolerance = 1e-9;
  int max_iterations = 200000;
  int starts = 3;                 ///< random starts when `initial` is unset
  double start_scale = 1.0;       ///< L^2 size of random starts
  std::uint64_t seed = 11;
  bool record_trace = false;
  std::optional<Field> initial;
};

struct UnconstrainedResult {
  Field field;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;
};

/// Minimizes H^G by monotone gradient descent. With A at or above the
/// coercivity threshold the minimizer is the zero field; convergence to a
/// nonzero point or a negative objective raises DiagnosticError.
[[nodiscard]] UnconstrainedResult minimize_unconstrained_hg(const HermiteBasis& basis, double coupling,
                                                            double chem_potential,
                                                            const UnconstrainedOptions& opts = {});

/// Distance from phi to the phase orbit {e^{i theta} Q} in L^p. For p = 2 the
/// optimal phase is arg <Q, phi>; otherwise a 64-point scan refined by golden
/// section. The orbit is a subset of the minimizer set, so this is an upper
/// bound for the distance to the full soliton manifold.
struct OrbitDistance {
  double theta_star = 0.0;        ///< in [0, 2 pi)
  double distance = 0.0;
  double p = 2.0;
};

[[nodiscard]] OrbitDistance orbit_distance(const HermiteBasis& basis, const Field& phi, const Field& q,
                                           double p);

}  // namespace gpgibbs
