#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpgibbs/mcmc.hpp"
#include "gpgibbs/soliton.hpp"

namespace gpgibbs {

struct RatePoint {
  double epsilon = 0.0;
  double log_value = 0.0;
  double std_error = 0.0;
};

/// Weighted least-squares fit log_value ~ b - c / epsilon.
struct RateFit {
  double slope_c = 0.0;
  double intercept_b = 0.0;
  double residual = 0.0;      ///< weighted residual sum of squares
  double slope_se = 0.0;
  double intercept_se = 0.0;
  std::vector<RatePoint> points;
};

/// Weights are 1 / std_error^2 (errors floored at 1e-12 (1 + |log_value|)).
/// Standard errors are inflated by sqrt(chi^2 / dof) when that exceeds one.
/// ParameterError with fewer than three distinct epsilon values.
[[nodiscard]] RateFit fit_rate(const std::vector<RatePoint>& points);

/// One (epsilon, r or delta) cell of an experiment.
struct ExperimentCell {
  double epsilon = 0.0;
  double knob = 0.0;          ///< r (entropy), delta (concentration), 0 otherwise
  Estimate estimate;          ///< log-scale for probabilities and partition functions
  double scaled = 0.0;        ///< epsilon * log value
  bool censored = false;      ///< zero exceedances: upper bound only
  std::string note;
};

struct KnobFit {
  double knob = 0.0;
  bool fitted = false;
  RateFit fit;
  double target = 0.0;        ///< variational rate at this knob value, when defined
};

struct ExperimentReport {
  std::string name;
  nlohmann::json config;
  std::vector<ExperimentCell> cells;
  std::vector<KnobFit> fits;
  RateFit headline;
  double target = 0.0;
  std::string target_source;
  double tolerance = 0.0;
  bool passed = false;
  std::string verdict;
  nlohmann::json extras = nlohmann::json::object();

  [[nodiscard]] nlohmann::json to_json() const;
};

struct ExperimentOptions {
  long n_samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// eps log Z_{eps,A} against the limit -inf H^G = 0.
[[nodiscard]] ExperimentReport free_energy_experiment(const HermiteBasis& basis, const GibbsParams& base_params,
                                                      const std::vector<double>& eps_grid,
                                                      const ExperimentOptions& opts, double tolerance = 0.05);

struct EntropyOptions : ExperimentOptions {
  std::vector<double> r_fractions{0.2, 0.1, 0.05};  ///< r = fraction * D
  double tolerance = 0.15;                          ///< relative, on the smallest-r slope
  double control_tolerance = 0.02;                  ///< relative, coupling = 0 and N = 0
};

/// Shell probabilities on an (eps, r) schedule, fitted in eps per r, compared
/// with inf_{M=D} of the ensemble rate functional plus A D^3.
[[nodiscard]] ExperimentReport entropy_experiment(const HermiteBasis& basis, const GibbsParams& base_params,
                                                  const std::vector<double>& eps_grid,
                                                  const EntropyOptions& opts);

struct ConcentrationOptions : ExperimentOptions {
  double p = 4.0;
  int n_burn = 5000;
  int thin = 5;
};

/// Exceedance fractions of the orbit distance under conditioned chains.
[[nodiscard]] ExperimentReport concentration_experiment(const HermiteBasis& basis, const GibbsParams& base_params,
                                                        const std::vector<double>& eps_grid,
                                                        const std::vector<double>& delta_grid,
                                                        const ConcentrationOptions& opts);

/// Minimizer of the ensemble rate functional on {M = D}: the soliton at half
/// the coupling (see ensemble_rate_functional). Its value is 2 I_{coupling/2}(D).
[[nodiscard]] SolitonResult ensemble_soliton(const HermiteBasis& basis, double coupling, double mass_level,
                                             const SolitonOptions& opts = {});

/// Shell-conditioned chain around the orbit of q: gauge-aligned proposal with
/// the covariance of shell_laplace_proposal, started at its in-shell point,
/// with beta the largest of 0.9, 0.7, 0.5, ... whose 4000-step pilot accepts
/// at least 25%. n_steps, n_burn and thin are left for the caller.
[[nodiscard]] ChainConfig shell_chain_config(const HermiteBasis& basis, const GibbsParams& params, const Field& q,
                                             std::uint64_t seed);

/// CSV of (epsilon, knob, estimate, std_error, scaled, censored).
void write_cells_csv(std::ostream& out, const ExperimentReport& report, const std::string& header_comment);

/// Two-column (1/epsilon, log value) data plus the fitted line, gnuplot-ready.
void write_fit_data(std::ostream& out, const KnobFit& fit, const std::string& header_comment);

}  // namespace gpgibbs
