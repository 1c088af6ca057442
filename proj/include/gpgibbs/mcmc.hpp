#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpgibbs/energy.hpp"
#include "gpgibbs/fields.hpp"
#include "gpgibbs/rng.hpp"

namespace gpgibbs {

/// Settings for one Metropolis chain targeting exp(-V/eps) mu_eps.
struct ChainConfig {
  GibbsParams params;
  double step_beta = 0.5;       ///< in (0, 1]
  int n_steps = 10000;
  int n_burn = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  Field init;                   ///< empty means the zero field
  /// Proposal center c: phi' = c + sqrt(1 - beta^2)(phi - c) + beta xi.
  /// Unset means c = 0, the plain Gaussian-reference proposal.
  std::optional<Field> center;
  /// Optional S with S S^T = Sigma, on the real coordinates (Re c_0..c_N,
  /// Im c_0..c_N). The proposal becomes c + sqrt(1 - beta^2)(phi - c) + beta S eta,
  /// reversible for N(c, Sigma); the filter corrects to the exact target.
  std::optional<Eigen::MatrixXd> sqrt_cov;
  /// With sqrt_cov: apply that move in the frame where <c, phi>_{H^1} is real
  /// and rotate back. The target is phase invariant; the filter includes the
  /// proposal density ratio.
  bool gauge_aligned = false;

  void validate(int modes) const;
};

/// Default mixing parameter: 0.5 for eps >= 0.2, 0.1 below.
[[nodiscard]] double default_step_beta(double epsilon);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  double n_effective = 0.0;
  bool log_scale = false;
};

struct Sample {
  int step = 0;
  Field phi;
  double wick_mass = 0.0;
  double h = 0.0;
  double hg = 0.0;
};

struct ChainDiagnostics {
  long proposals = 0;
  long accepted = 0;
  long shell_rejections = 0;
  double acceptance_rate = 0.0;
  double iat_mass = 1.0;        ///< integrated autocorrelation time of ||phi||^2, in recorded samples
  std::string warning;          ///< non-empty when acceptance < 1%
};

struct SampleStore {
  std::vector<Sample> samples;
  ChainDiagnostics diagnostics;
};

struct StepResult {
  Field state;
  bool accepted = false;
};

/// One Metropolis step with the Gaussian-reference proposal. The acceptance
/// probability min(1, exp((Phi(phi) - Phi(phi'))/eps)) with
/// Phi = V + 2 Re<c, .>_{H^1} is exact for the target (no Jacobian terms).
[[nodiscard]] StepResult pcn_step(const HermiteBasis& basis, const Field& state, const ChainConfig& config,
                                  Rng& rng);

[[nodiscard]] SampleStore run_chain(const HermiteBasis& basis, const ChainConfig& config);

/// Same chain restricted to {|M^w - D| <= r}: out-of-shell proposals are
/// rejected inside the Metropolis filter. ParameterError if init is outside.
[[nodiscard]] SampleStore run_conditioned_chain(const HermiteBasis& basis, const ChainConfig& config);

/// Q rescaled to mass D + renorm_constant, so that its Wick mass is exactly D.
[[nodiscard]] Field make_shell_init(const HermiteBasis& basis, const GibbsParams& params, const Field& q);

/// Gaussian fitted to the shell-conditioned target near the orbit of Q:
/// the Hessian of V + ||.||_{H^1}^2 at the rescaled Q, floored, with the mass
/// direction narrowed to the width set by the shell and the mass tilt. The
/// center sits at the mass where that tilt concentrates the shell law.
struct ShellProposal {
  Field center;
  Eigen::MatrixXd sqrt_cov;
  Field init;                  ///< Q rescaled to Wick mass target_mass (inside the shell)
  double tilt = 0.0;           ///< d(V + ||.||_{H^1}^2)/dM along the rescaled Q
  double target_mass = 0.0;    ///< Wick mass the center aims at
};
[[nodiscard]] ShellProposal shell_laplace_proposal(const HermiteBasis& basis, const GibbsParams& params,
                                                   const Field& q);

/// Integrated autocorrelation time with Sokal's automatic window (c = 5).
[[nodiscard]] double integrated_autocorrelation_time(const std::vector<double>& series);

/// Streaming log-sum-exp accumulator for nonnegative weights given by logs.
class LogWeightAccumulator {
 public:
  void add(double log_weight);
  void merge(const LogWeightAccumulator& other);

  [[nodiscard]] long count() const { return count_; }
  [[nodiscard]] double log_mean() const;
  /// Delta-method standard error of log_mean().
  [[nodiscard]] double log_mean_std_error() const;
  [[nodiscard]] double effective_sample_size() const;

 private:
  double shift_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
  long count_ = 0;
};

/// log E_mu[exp(-V/eps)]. Draws come from 0.8 mu_eps + 0.2 mu_{3 eps}, with
/// weights exp(-V/eps) dmu/dq; the wide component keeps the weight variance
/// finite in practice when A is barely coercive. Exact 0 when V = 0.
[[nodiscard]] Estimate estimate_partition(const HermiteBasis& basis, const GibbsParams& params, long n_samples,
                                          Rng& rng, int threads = 1);

/// log rho_{eps,A}(|M^w - D| <= r). The numerator is sampled from mu_eps
/// shifted to e^{i theta} Q_m, with theta uniform and Q_m the rescaling of Q
/// to one of eight Wick masses m spread over the shell; weights use the exact
/// mixture density. The denominator is estimate_partition.
[[nodiscard]] Estimate estimate_shell_probability(const HermiteBasis& basis, const GibbsParams& params,
                                                  const Field& q, long n_samples, Rng& rng, int threads = 1);

/// Same probability from unshifted draws (self-normalized ratio). Only usable
/// where the shell is not rare; serves as an independent cross-check.
[[nodiscard]] Estimate estimate_shell_probability_naive(const HermiteBasis& basis, const GibbsParams& params,
                                                        long n_samples, Rng& rng, int threads = 1);

/// CSV: step, re_0, im_0, ..., re_N, im_N, wick_mass, H, HG. The first line is
/// `# <header_comment>` when the comment is non-empty.
void write_samples_csv(std::ostream& out, const SampleStore& store, const std::string& header_comment);

}  // namespace gpgibbs
