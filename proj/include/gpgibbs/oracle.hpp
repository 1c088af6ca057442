#pragma once

#include <functional>

#include "gpgibbs/fields.hpp"
#include "gpgibbs/spectral.hpp"

namespace gpgibbs {

/// Named observables for the tiny-N quadrature oracle.
enum class OracleObservable {
  Partition,            ///< E_mu[exp(-V/eps)]
  ShellMass,            ///< E_mu[exp(-V/eps) 1_shell]
  ShellProbability,     ///< ShellMass / Partition
  ConditionalMoment,    ///< E[|c_0|^2 | shell] under rho_{eps,A}
  GrandMoment,          ///< E[|c_0|^2] under rho_{eps,A}
  GrandSecondMoment,    ///< E[|c_0|^4] under rho_{eps,A}
};

/// Product grid in the polar coordinates of the complex coordinates (global
/// phase integrated out): radius rho = ||phi||_{L^2}, mixing angle alpha, and
/// relative phase theta. The radial range covers `sd_cover` standard
/// deviations of every real coordinate and the shell.
struct OracleGrid {
  int radial_panels = 96;
  int radial_points = 16;   ///< Gauss-Legendre points per panel
  int angle_points = 48;    ///< Gauss-Legendre points for alpha (N = 1)
  int phase_points = 48;    ///< trapezoid points for theta (N = 1)
  double sd_cover = 6.0;
};

/// E_mu[exp(-V/eps) * (shell_only ? 1_shell : 1) * f(phi)] by deterministic
/// tensor quadrature. ParameterError unless the real dimension 2(N+1) <= 4.
[[nodiscard]] double oracle_expectation(const HermiteBasis& basis, const GibbsParams& params,
                                        const std::function<double(const Field&)>& f, bool shell_only,
                                        const OracleGrid& grid = {});

[[nodiscard]] double quadrature_oracle(const HermiteBasis& basis, const GibbsParams& params,
                                       OracleObservable observable, const OracleGrid& grid = {});

}  // namespace gpgibbs
