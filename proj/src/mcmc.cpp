#include "gpgibbs/mcmc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "gpgibbs/errors.hpp"
#include "gpgibbs/parallel.hpp"

namespace gpgibbs {
namespace {

constexpr long kChunk = 4096;
constexpr double kMinEffectiveSamples = 10.0;
constexpr int kShellCenters = 8;

// log I_0(x) for x >= 0, without overflow.
double log_bessel_i0(double x) {
  if (x < 600.0) return std::log(std::cyl_bessel_i(0.0, x));
  const double u = 1.0 / (8.0 * x);
  return x - 0.5 * std::log(2.0 * M_PI * x) + std::log1p(u + 4.5 * u * u + 37.5 * u * u * u);
}

Eigen::VectorXd to_real(const CVector& c) {
  Eigen::VectorXd x(2 * c.size());
  x << c.real(), c.imag();
  return x;
}

CVector from_real(const Eigen::VectorXd& x) {
  const Eigen::Index m = x.size() / 2;
  CVector c(m);
  c.real() = x.head(m);
  c.imag() = x.tail(m);
  return c;
}

// Potential seen by the Metropolis filter. Plain or centered proposals leave
// mu_eps invariant and see V + 2 Re<c, phi>_{H^1}; a proposal with its own
// covariance leaves N(c, Sigma) invariant and sees
// V + ||phi||_{H^1}^2 - (eps / 2) |Sigma^{-1/2} (phi - c)|^2. Gauge-aligned
// proposals see V + ||phi||_{H^1}^2 and carry their own density ratio.
class Target {
 public:
  Target(const HermiteBasis& basis, const ChainConfig& config, bool conditioned)
      : basis_(basis), config_(config), conditioned_(conditioned) {
    if (config.sqrt_cov) {
      center_real_ = to_real(config.center->coeffs);
      whiten_ = config.sqrt_cov->partialPivLu();
    }
  }

  [[nodiscard]] double potential(const Field& phi) const {
    double v = tamed_potential(basis_, config_.params, phi);
    if (config_.gauge_aligned) {
      v += h1_pairing(basis_, phi, phi);
    } else if (config_.sqrt_cov) {
      const Eigen::VectorXd white = whiten_.solve(to_real(phi.coeffs) - center_real_);
      v += h1_pairing(basis_, phi, phi) - 0.5 * config_.params.epsilon * white.squaredNorm();
    } else if (config_.center) {
      v += 2.0 * h1_pairing(basis_, *config_.center, phi);
    }
    return v;
  }

  [[nodiscard]] bool in_shell(const Field& phi) const {
    return std::abs(wick_mass(basis_, config_.params, phi) - config_.params.mass_level) <=
           config_.params.shell_width;
  }

  // log_q_ratio receives log q(phi | phi') - log q(phi' | phi) when the
  // proposal is not reversible for the filter's reference, zero otherwise.
  [[nodiscard]] Field propose(const Field& phi, Rng& rng, double& log_q_ratio) const {
    const double beta = config_.step_beta;
    const double keep = std::sqrt(std::max(0.0, 1.0 - beta * beta));
    log_q_ratio = 0.0;
    if (config_.sqrt_cov) {
      std::normal_distribution<double> normal(0.0, 1.0);
      Eigen::VectorXd eta(center_real_.size());
      for (Eigen::Index k = 0; k < eta.size(); ++k) eta[k] = normal(rng);
      if (!config_.gauge_aligned) {
        const Eigen::VectorXd x =
            center_real_ + keep * (to_real(phi.coeffs) - center_real_) + beta * (*config_.sqrt_cov * eta);
        return Field(from_real(x));
      }
      // Rotate into the frame where <c, phi>_{H^1} is real, move, rotate back.
      const Complex rot = gauge_phase(phi);
      const Eigen::VectorXd x = to_real(phi.coeffs * std::conj(rot));
      const Eigen::VectorXd y = center_real_ + keep * (x - center_real_) + beta * (*config_.sqrt_cov * eta);
      Field out(from_real(y) * rot);
      const Complex back = std::conj(gauge_phase(out));
      const Eigen::VectorXd xb = to_real(phi.coeffs * back);
      const Eigen::VectorXd yb = to_real(out.coeffs * back);
      const Eigen::VectorXd resid = whiten_.solve(xb - center_real_ - keep * (yb - center_real_));
      log_q_ratio = 0.5 * eta.squaredNorm() - 0.5 * resid.squaredNorm() / (beta * beta);
      return out;
    }
    const Field xi = sample_gaussian(basis_, config_.params, rng);
    if (config_.center) {
      const CVector& c = config_.center->coeffs;
      return Field(c + keep * (phi.coeffs - c) + beta * xi.coeffs);
    }
    return Field(keep * phi.coeffs + beta * xi.coeffs);
  }

  // Returns true on acceptance; `state` and `pot` are updated in place.
  bool step(Field& state, double& pot, Rng& rng, long& shell_rejections) const {
    double log_q_ratio = 0.0;
    Field proposal = propose(state, rng, log_q_ratio);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    if (conditioned_ && !in_shell(proposal)) {
      ++shell_rejections;
      return false;
    }
    const double prop_pot = potential(proposal);
    const double log_alpha = (pot - prop_pot) / config_.params.epsilon + log_q_ratio;
    if (log_alpha >= 0.0 || std::log(u) < log_alpha) {
      state = std::move(proposal);
      pot = prop_pot;
      return true;
    }
    return false;
  }

 private:
  // Unit complex number with phase arg <c, phi>_{H^1}.
  [[nodiscard]] Complex gauge_phase(const Field& phi) const {
    const Complex z = (basis_.eigenvalues.array().square() * config_.center->coeffs.conjugate().array() *
                       phi.coeffs.array()).sum();
    return z == Complex(0.0) ? Complex(1.0) : z / std::abs(z);
  }

  const HermiteBasis& basis_;
  const ChainConfig& config_;
  bool conditioned_;
  Eigen::VectorXd center_real_;
  Eigen::PartialPivLU<Eigen::MatrixXd> whiten_;
};

Field initial_state(const HermiteBasis& basis, const ChainConfig& config) {
  if (config.init.size() == 0) return Field::zero(basis.modes());
  return config.init;
}

SampleStore run(const HermiteBasis& basis, const ChainConfig& config, bool conditioned) {
  config.validate(basis.modes());
  config.params.validate();
  Target target(basis, config, conditioned);
  Field state = initial_state(basis, config);
  if (conditioned && !target.in_shell(state)) {
    throw ParameterError("run_conditioned_chain: initial field is outside the mass shell");
  }
  Rng rng(config.seed);
  double pot = target.potential(state);

  SampleStore store;
  auto& diag = store.diagnostics;
  for (int t = 1; t <= config.n_steps; ++t) {
    ++diag.proposals;
    if (target.step(state, pot, rng, diag.shell_rejections)) ++diag.accepted;
    if (t > config.n_burn && (t - config.n_burn) % config.thin == 0) {
      const EnergyBreakdown e =
          hamiltonian(basis, state, config.params.coupling, config.params.chem_potential);
      store.samples.push_back(Sample{t, state, wick_mass(basis, config.params, state), e.total_h, e.total_hg});
    }
  }
  diag.acceptance_rate = static_cast<double>(diag.accepted) / static_cast<double>(diag.proposals);
  std::vector<double> series;
  series.reserve(store.samples.size());
  for (const auto& s : store.samples) series.push_back(s.phi.coeffs.squaredNorm());
  diag.iat_mass = integrated_autocorrelation_time(series);
  if (diag.acceptance_rate < 0.01) {
    diag.warning = "acceptance rate " + std::to_string(diag.acceptance_rate) +
                   " below 1%: step_beta too large for this temperature";
  }
  return store;
}

template <class Fn>
LogWeightAccumulator accumulate_chunks(long n_samples, std::uint64_t base_seed, int threads, Fn&& per_sample) {
  const int chunks = static_cast<int>((n_samples + kChunk - 1) / kChunk);
  std::vector<LogWeightAccumulator> parts(chunks);
  parallel_for(chunks, threads, [&](int c) {
    Rng rng(derive_seed(base_seed, static_cast<std::uint64_t>(c)));
    const long begin = c * kChunk;
    const long end = std::min(n_samples, begin + kChunk);
    for (long i = begin; i < end; ++i) parts[c].add(per_sample(rng));
  });
  LogWeightAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

void require_samples(long n_samples, const char* who) {
  if (n_samples < 1000) throw ParameterError(std::string(who) + ": n_samples must be >= 1000");
}

void require_effective(const LogWeightAccumulator& acc, const char* who) {
  const double ess = acc.effective_sample_size();
  if (!(ess >= kMinEffectiveSamples)) {
    throw DiagnosticError(std::string(who) + ": effective sample size " + std::to_string(ess) +
                          " < 10 (importance weights degenerate)");
  }
}

}  // namespace

void ChainConfig::validate(int modes) const {
  if (!(step_beta > 0.0 && step_beta <= 1.0)) throw ParameterError("step_beta must lie in (0, 1]");
  if (!(n_steps > n_burn && n_burn >= 0)) throw ParameterError("need n_steps > n_burn >= 0");
  if (thin < 1) throw ParameterError("thin must be >= 1");
  if (init.size() != 0 && init.size() != modes) throw ParameterError("init has the wrong number of modes");
  if (center && center->size() != modes) throw ParameterError("center has the wrong number of modes");
  if (sqrt_cov) {
    if (!center) throw ParameterError("sqrt_cov needs a center");
    if (sqrt_cov->rows() != 2 * modes || sqrt_cov->cols() != 2 * modes) {
      throw ParameterError("sqrt_cov must be square of size 2 (N + 1)");
    }
    if (!sqrt_cov->fullPivLu().isInvertible()) throw ParameterError("sqrt_cov must be invertible");
  }
  if (gauge_aligned && !sqrt_cov) throw ParameterError("gauge_aligned needs sqrt_cov");
}

double default_step_beta(double epsilon) { return epsilon >= 0.2 ? 0.5 : 0.1; }

StepResult pcn_step(const HermiteBasis& basis, const Field& state, const ChainConfig& config, Rng& rng) {
  Target target(basis, config, false);
  StepResult out{state, false};
  double pot = target.potential(state);
  long ignored = 0;
  out.accepted = target.step(out.state, pot, rng, ignored);
  return out;
}

SampleStore run_chain(const HermiteBasis& basis, const ChainConfig& config) { return run(basis, config, false); }

SampleStore run_conditioned_chain(const HermiteBasis& basis, const ChainConfig& config) {
  return run(basis, config, true);
}

Field make_shell_init(const HermiteBasis& basis, const GibbsParams& params, const Field& q) {
  const double m = mass(basis, q);
  if (m <= 0.0) throw ParameterError("make_shell_init: zero field");
  const double target = params.mass_level + renorm_constant(params);
  return Field(q.coeffs * std::sqrt(target / m));
}

ShellProposal shell_laplace_proposal(const HermiteBasis& basis, const GibbsParams& params, const Field& q) {
  params.validate();
  const double q_mass = mass(basis, q);
  if (!(q_mass > 0.0)) throw ParameterError("shell_laplace_proposal: zero field");
  const double eps = params.epsilon;
  const double r = params.shell_width;
  const double sigma = renorm_constant(params);
  const Eigen::ArrayXd lam2 = basis.eigenvalues.array().square();
  const Eigen::Index dim = 2 * basis.modes();

  // Gradient of V + ||.||_{H^1}^2 on the real coordinates.
  auto gradient = [&](const Eigen::VectorXd& x) {
    const Field phi(from_real(x));
    const double mw = wick_mass(basis, params, phi);
    CVector g = gradient_h(basis, phi, params.coupling).coeffs;
    g += (lam2 * phi.coeffs.array()).matrix() + 6.0 * params.chem_potential * std::abs(mw) * mw * phi.coeffs;
    return to_real(g);
  };

  ShellProposal out;
  double center_mass = params.mass_level + sigma;
  for (int pass = 0; pass < 3; ++pass) {
    const Eigen::VectorXd x = to_real(q.coeffs) * std::sqrt(center_mass / q_mass);
    const double norm = x.norm();
    const Eigen::VectorXd u = x / norm;
    out.tilt = gradient(x).dot(x) / (2.0 * norm * norm);
    const double width = out.tilt != 0.0 ? eps / std::abs(out.tilt) : kInfiniteRate;
    const double sd_mass = std::min(0.5 * r, width);
    out.target_mass = width >= r ? params.mass_level
                                 : params.mass_level - std::copysign(r - width, out.tilt);

    Eigen::MatrixXd hess(dim, dim);
    const double h = 1e-6 * std::max(1.0, norm);
    for (Eigen::Index k = 0; k < dim; ++k) {
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      hess.col(k) = (gradient(xp) - gradient(xm)) / (2.0 * h);
    }
    hess = 0.5 * (hess + hess.transpose()) / eps;
    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(dim, dim) - u * u.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(proj * hess * proj);
    Eigen::VectorXd prec = es.eigenvalues();
    const double floor = 0.5 / eps;
    const double radial = std::pow(2.0 * norm / sd_mass, 2);
    for (Eigen::Index k = 0; k < dim; ++k) {
      prec[k] = std::abs(es.eigenvectors().col(k).dot(u)) > 0.5 ? radial : std::max(prec[k], floor);
    }
    out.sqrt_cov = es.eigenvectors() * prec.cwiseInverse().cwiseSqrt().asDiagonal();
    out.center = Field(from_real(x));
    // E||c + xi||^2 = ||c||^2 + tr Sigma; aim the Wick mass at target_mass.
    const double next = out.target_mass + sigma - prec.cwiseInverse().sum();
    if (!(next > 0.0)) break;
    center_mass = next;
  }
  out.init = Field(q.coeffs * std::sqrt((out.target_mass + sigma) / q_mass));
  return out;
}

double integrated_autocorrelation_time(const std::vector<double>& series) {
  const auto n = static_cast<long>(series.size());
  if (n < 4) return 1.0;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= n;
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= n;
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (long lag = 1; lag < n / 2; ++lag) {
    double c = 0.0;
    for (long i = 0; i + lag < n; ++i) c += (series[i] - mean) * (series[i + lag] - mean);
    c /= n;
    tau += 2.0 * c / c0;
    if (lag >= 5.0 * tau) break;
  }
  return std::max(1.0, tau);
}

void LogWeightAccumulator::add(double log_weight) {
  ++count_;
  if (log_weight == -std::numeric_limits<double>::infinity()) return;
  if (log_weight > shift_) {
    const double r = std::exp(shift_ - log_weight);
    sum_ *= r;
    sum_sq_ *= r * r;
    shift_ = log_weight;
  }
  const double w = std::exp(log_weight - shift_);
  sum_ += w;
  sum_sq_ += w * w;
}

void LogWeightAccumulator::merge(const LogWeightAccumulator& other) {
  count_ += other.count_;
  if (other.sum_ == 0.0) return;
  if (other.shift_ > shift_) {
    const double r = std::exp(shift_ - other.shift_);
    sum_ *= r;
    sum_sq_ *= r * r;
    shift_ = other.shift_;
  }
  const double r = std::exp(other.shift_ - shift_);
  sum_ += other.sum_ * r;
  sum_sq_ += other.sum_sq_ * r * r;
}

double LogWeightAccumulator::log_mean() const {
  if (count_ == 0 || sum_ == 0.0) return -std::numeric_limits<double>::infinity();
  return shift_ + std::log(sum_ / static_cast<double>(count_));
}

double LogWeightAccumulator::log_mean_std_error() const {
  if (count_ < 2 || sum_ == 0.0) return std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(count_);
  const double rel_var = n * sum_sq_ / (sum_ * sum_) - 1.0;
  return std::sqrt(std::max(0.0, rel_var) / (n - 1.0));
}

double LogWeightAccumulator::effective_sample_size() const {
  if (sum_sq_ == 0.0) return 0.0;
  return sum_ * sum_ / sum_sq_;
}

Estimate estimate_partition(const HermiteBasis& basis, const GibbsParams& params, long n_samples, Rng& rng,
                            int threads) {
  require_samples(n_samples, "estimate_partition");
  params.validate();
  const std::uint64_t base = rng();
  const double eps = params.epsilon;
  if (params.coupling == 0.0 && params.chem_potential == 0.0) {
    return Estimate{0.0, 0.0, static_cast<double>(n_samples), true};
  }
  // Defensive mixture: mu_eps with weight 1 - a, mu_{k eps} with weight a.
  // The wide component covers the large-mass tail where exp(-V/eps) is
  // heavy-tailed under mu_eps; weights carry the exact mixture density.
  constexpr double kWideWeight = 0.2;
  constexpr double kWideScale = 3.0;
  GibbsParams wide = params;
  wide.epsilon = kWideScale * eps;
  const LogWeightAccumulator acc = accumulate_chunks(n_samples, base, threads, [&](Rng& r) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Field phi = sample_gaussian(basis, u(r) < kWideWeight ? wide : params, r);
    const double log_mu = gaussian_logdensity(basis, params, phi);
    const double a = std::log1p(-kWideWeight) + log_mu;
    const double b = std::log(kWideWeight) + gaussian_logdensity(basis, wide, phi);
    const double log_q = std::max(a, b) + std::log1p(std::exp(-std::abs(a - b)));
    return -tamed_potential(basis, params, phi) / eps + log_mu - log_q;
  });
  require_effective(acc, "estimate_partition");
  return Estimate{acc.log_mean(), acc.log_mean_std_error(), acc.effective_sample_size(), true};
}

Estimate estimate_shell_probability(const HermiteBasis& basis, const GibbsParams& params, const Field& q,
                                    long n_samples, Rng& rng, int threads) {
  require_samples(n_samples, "estimate_shell_probability");
  params.validate();
  // Mixture proposal: mu_eps shifted to e^{i theta} c_j, theta uniform, with
  // c_j the rescaled Q at masses spread over the shell. The phase average of
  // the shifted density ratio is exp(-|c_j|^2 / eps) I_0(2 |<c_j, phi>| / eps).
  const Field base_center = make_shell_init(basis, params, q);
  const double m0 = mass(basis, base_center);
  const double sigma = renorm_constant(params);
  std::vector<double> scales(kShellCenters), cost(kShellCenters);
  for (int j = 0; j < kShellCenters; ++j) {
    const double m = params.mass_level - params.shell_width +
                     2.0 * params.shell_width * (j + 0.5) / kShellCenters + sigma;
    scales[j] = std::sqrt(std::max(m, 0.0) / m0);
    cost[j] = scales[j] * scales[j] * h1_pairing(basis, base_center, base_center) / params.epsilon;
  }
  const std::uint64_t base = rng();
  const double eps = params.epsilon;
  const LogWeightAccumulator num = accumulate_chunks(n_samples, base, threads, [&](Rng& r) {
    std::uniform_int_distribution<int> pick(0, kShellCenters - 1);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    const int j = pick(r);
    const double theta = phase(r);
    const Field xi = sample_gaussian(basis, params, r);
    const Field phi(base_center.coeffs * std::polar(scales[j], theta) + xi.coeffs);
    if (std::abs(wick_mass(basis, params, phi) - params.mass_level) > params.shell_width) {
      return -std::numeric_limits<double>::infinity();
    }
    const Complex z = (basis.eigenvalues.array().square() * base_center.coeffs.conjugate().array() *
                       phi.coeffs.array()).sum();
    double shift = -std::numeric_limits<double>::infinity();
    std::array<double, kShellCenters> terms{};
    for (int k = 0; k < kShellCenters; ++k) {
      terms[k] = log_bessel_i0(2.0 * scales[k] * std::abs(z) / eps) - cost[k];
      shift = std::max(shift, terms[k]);
    }
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - shift);
    const double log_ratio = shift + std::log(acc / kShellCenters);
    return -tamed_potential(basis, params, phi) / eps - log_ratio;
  });
  require_effective(num, "estimate_shell_probability");
  Rng den_rng(derive_seed(base, 0xde1707ULL));
  const Estimate den = estimate_partition(basis, params, n_samples, den_rng, threads);
  const double se_num = num.log_mean_std_error();
  return Estimate{num.log_mean() - den.value, std::hypot(se_num, den.std_error), num.effective_sample_size(),
                  true};
}

Estimate estimate_shell_probability_naive(const HermiteBasis& basis, const GibbsParams& params, long n_samples,
                                          Rng& rng, int threads) {
  require_samples(n_samples, "estimate_shell_probability_naive");
  params.validate();
  const std::uint64_t base = rng();
  const double eps = params.epsilon;
  const int chunks = static_cast<int>((n_samples + kChunk - 1) / kChunk);
  // Self-normalized ratio sum(w 1_shell) / sum(w) with a common reference
  // shift per chunk so that the delta-method covariance term is available.
  std::vector<std::vector<std::pair<double, bool>>> draws(chunks);
  parallel_for(chunks, threads, [&](int c) {
    Rng r(derive_seed(base, static_cast<std::uint64_t>(c)));
    const long begin = c * kChunk;
    const long end = std::min(n_samples, begin + kChunk);
    for (long i = begin; i < end; ++i) {
      const Field phi = sample_gaussian(basis, params, r);
      const bool in = std::abs(wick_mass(basis, params, phi) - params.mass_level) <= params.shell_width;
      draws[c].emplace_back(-tamed_potential(basis, params, phi) / eps, in);
    }
  });
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& chunk : draws) {
    for (const auto& [lw, in] : chunk) shift = std::max(shift, lw);
  }
  double s_all = 0.0, s_in = 0.0, s_all2 = 0.0, s_in2 = 0.0;
  long n = 0;
  for (const auto& chunk : draws) {
    for (const auto& [lw, in] : chunk) {
      const double w = std::exp(lw - shift);
      s_all += w;
      s_all2 += w * w;
      if (in) {
        s_in += w;
        s_in2 += w * w;
      }
      ++n;
    }
  }
  if (s_in == 0.0) {
    throw DiagnosticError("estimate_shell_probability_naive: no draw landed in the shell");
  }
  const double p = s_in / s_all;
  // Var of the ratio estimator: sum w^2 (1_shell - p)^2 / (sum w)^2.
  const double var = (s_in2 * (1.0 - p) * (1.0 - p) + (s_all2 - s_in2) * p * p) / (s_all * s_all);
  const double ess = s_in * s_in / s_in2;
  if (ess < kMinEffectiveSamples) {
    throw DiagnosticError("estimate_shell_probability_naive: effective sample size below 10");
  }
  return Estimate{std::log(p), std::sqrt(var) / p, ess, true};
}

void write_samples_csv(std::ostream& out, const SampleStore& store, const std::string& header_comment) {
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  const Eigen::Index modes = store.samples.empty() ? 0 : store.samples.front().phi.size();
  out << "step";
  for (Eigen::Index n = 0; n < modes; ++n) out << ",re_" << n << ",im_" << n;
  out << ",wick_mass,H,HG\n";
  out << std::setprecision(17);
  for (const auto& s : store.samples) {
    out << s.step;
    for (Eigen::Index n = 0; n < modes; ++n) out << ',' << s.phi.coeffs[n].real() << ',' << s.phi.coeffs[n].imag();
    out << ',' << s.wick_mass << ',' << s.h << ',' << s.hg << '\n';
  }
}

}  // namespace gpgibbs
