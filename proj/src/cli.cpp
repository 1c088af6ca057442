#include "gpgibbs/cli.hpp"

#include <Eigen/Core>
#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "gpgibbs/config.hpp"
#include "gpgibbs/errors.hpp"
#include "gpgibbs/ldp.hpp"
#include "gpgibbs/oracle.hpp"

namespace gpgibbs {
namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::vector<double> eps;
  std::optional<double> mass;
  std::vector<double> shell;
  std::vector<double> delta;
  std::optional<long> n_samples;
  std::optional<int> truncation;
};

ExperimentConfig resolve_config(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out_dir = *o.out;
  if (o.threads) c.threads = *o.threads;
  if (o.truncation) c.params.truncation = *o.truncation;
  if (o.mass) c.params.mass_level = *o.mass;
  if (!o.eps.empty()) {
    c.params.epsilon = o.eps.front();
    c.eps_grid = o.eps;
  }
  if (!o.shell.empty()) {
    c.params.shell_width = o.shell.front();
    c.r_fractions.clear();
    for (double r : o.shell) c.r_fractions.push_back(r / c.params.mass_level);
  }
  if (!o.delta.empty()) c.delta_grid = o.delta;
  if (o.n_samples) c.n_samples = *o.n_samples;
  c.validate();
  return c;
}

// One output directory per run; every file starts with the config hash.
class RunOutput {
 public:
  RunOutput(const ExperimentConfig& cfg, std::string command)
      : dir_(cfg.out_dir), hash_(cfg.hash()), seed_(cfg.seed), command_(std::move(command)) {
    fs::create_directories(dir_);
  }

  std::string header() const {
    return "config_hash=" + hash_ + " seed=" + std::to_string(seed_) + " command=" + command_;
  }

  std::ofstream open(const std::string& name) {
    files_.push_back(name);
    std::ofstream f(dir_ / name);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    return f;
  }

  void text(const std::string& name, const std::string& body) {
    auto f = open(name);
    f << "# " << header() << '\n' << body;
  }

  void json(const std::string& name, nlohmann::json j) {
    j["config_hash"] = hash_;
    j["seed"] = seed_;
    auto f = open(name);
    f << j.dump(2) << '\n';
  }

  const std::vector<std::string>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::string hash_;
  std::uint64_t seed_;
  std::string command_;
  std::vector<std::string> files_;
};

std::string g17(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

// Fills in A when the config says `auto`.
nlohmann::json resolve_chem_potential(ExperimentConfig& cfg, const HermiteBasis& basis) {
  if (!cfg.auto_chem_potential) return {{"mode", "fixed"}, {"value", cfg.params.chem_potential}};
  if (cfg.params.coupling == 0.0) {
    cfg.params.chem_potential = 0.0;
    return {{"mode", "auto"}, {"value", 0.0}, {"note", "coupling 0: no taming needed"}};
  }
  CalibrationOptions opts;
  opts.margin = cfg.calibration_margin;
  opts.seed = derive_seed(cfg.seed, 0xCA11B);
  const Calibration cal = calibrate_A(basis, cfg.params.coupling, cfg.calibration_probes, opts);
  cfg.params.chem_potential = cal.a0;
  return {{"mode", "auto"},         {"value", cal.a0},         {"required", cal.required},
          {"worst_mass", cal.worst_mass}, {"gns_constant", cal.gns_constant}, {"probes", cal.probes}};
}

void require_tamed(const ExperimentConfig& cfg) {
  if (cfg.params.coupling > 0.0 && cfg.params.chem_potential <= 0.0) {
    throw ParameterError("coupling > 0 needs chem_potential > 0 (or auto) for sampling");
  }
}

ChainConfig chain_config(const ExperimentConfig& cfg) {
  ChainConfig c;
  c.params = cfg.params;
  c.step_beta = cfg.step_beta > 0.0 ? cfg.step_beta : default_step_beta(cfg.params.epsilon);
  c.n_steps = cfg.n_steps;
  c.n_burn = cfg.n_burn;
  c.thin = cfg.thin;
  c.seed = cfg.seed;
  return c;
}

nlohmann::json diagnostics_json(const ChainDiagnostics& d, double beta) {
  return {{"step_beta", beta},          {"proposals", d.proposals},           {"accepted", d.accepted},
          {"shell_rejections", d.shell_rejections}, {"acceptance_rate", d.acceptance_rate},
          {"iat_mass", d.iat_mass},     {"warning", d.warning}};
}

void write_report(RunOutput& out, const ExperimentReport& rep, std::ostream& log) {
  out.json("report.json", rep.to_json());
  {
    auto f = out.open("cells.csv");
    write_cells_csv(f, rep, out.header());
  }
  for (std::size_t i = 0; i < rep.fits.size(); ++i) {
    auto f = out.open("fit_" + std::to_string(i) + ".dat");
    write_fit_data(f, rep.fits[i], out.header());
  }
  log << rep.name << ": " << rep.verdict << '\n';
}

// Shell probability of the pure Gaussian reference at N = 0 or 1: the mass is
// a sum of independent exponentials with means eps / lambda_n^2.
double gaussian_shell_closed_form(const GibbsParams& p) {
  const double lo = std::max(0.0, p.mass_level - p.shell_width + renorm_constant(p));
  const double hi = p.mass_level + p.shell_width + renorm_constant(p);
  auto tail = [&](double s) {
    if (p.truncation == 0) return std::exp(-s / p.epsilon);
    const double k1 = 1.0 / p.epsilon, k2 = 3.0 / p.epsilon;
    return (k2 * std::exp(-k1 * s) - k1 * std::exp(-k2 * s)) / (k2 - k1);
  };
  return tail(lo) - tail(hi);
}

int dispatch(const std::string& cmd, ExperimentConfig cfg, std::ostream& log, nlohmann::json& manifest) {
  const HermiteBasis basis = build_basis(cfg.params.truncation);
  RunOutput out(cfg, cmd);
  const bool samples = cmd == "sample" || cmd == "condition" || cmd == "free-energy" || cmd == "entropy" ||
                       cmd == "concentration" || cmd == "oracle";
  if (samples) {
    manifest["chem_potential"] = resolve_chem_potential(cfg, basis);
    require_tamed(cfg);
  }
  const GibbsParams& p = cfg.params;
  int status = 0;

  if (cmd == "soliton") {
    SolitonOptions o;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.record_trace = true;
    const SolitonResult s = minimize_constrained(basis, p.coupling, p.mass_level, o);
    std::ostringstream q, t;
    q << "n,re,im\n";
    for (Eigen::Index n = 0; n < s.q_coeffs.size(); ++n) {
      q << n << ',' << g17(s.q_coeffs.coeffs[n].real()) << ',' << g17(s.q_coeffs.coeffs[n].imag()) << '\n';
    }
    t << "iteration,energy\n";
    for (std::size_t i = 0; i < s.energy_trace.size(); ++i) t << i << ',' << g17(s.energy_trace[i]) << '\n';
    out.text("soliton_q.csv", q.str());
    out.text("soliton_trace.csv", t.str());
    const double d = p.mass_level;
    out.json("soliton.json", {{"mass_level", d},
                              {"coupling", p.coupling},
                              {"energy", s.energy},
                              {"mass_residual", s.mass_residual},
                              {"grad_residual", s.grad_residual},
                              {"iterations", s.iterations},
                              {"converged", s.converged},
                              {"competitor_bound", d / 2 - p.coupling * d * d / (4 * std::sqrt(2 * M_PI))}});
    log << "I(" << d << ") = " << g17(s.energy) << '\n';
  } else if (cmd == "dstar") {
    SolitonOptions o;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    const ThresholdScan scan = scan_mass_threshold(basis, p.coupling, cfg.mass_scan, o);
    std::ostringstream t;
    t << "mass_level,energy,competitor_bound,converged\n";
    for (const auto& r : scan.rows) {
      t << g17(r.mass_level) << ',' << g17(r.energy) << ',' << g17(r.competitor_bound) << ',' << r.converged << '\n';
    }
    out.text("dstar.csv", t.str());
    const bool found = std::isfinite(scan.d_star);
    out.json("dstar.json", {{"coupling", p.coupling}, {"found", found}, {"d_star", found ? scan.d_star : -1.0}});
    log << (found ? "D* <= " + g17(scan.d_star) : std::string("no D* on the scan grid")) << '\n';
  } else if (cmd == "sample") {
    const ChainConfig c = chain_config(cfg);
    const SampleStore s = run_chain(basis, c);
    auto f = out.open("samples.csv");
    write_samples_csv(f, s, out.header());
    out.json("chain.json", diagnostics_json(s.diagnostics, c.step_beta));
    log << "acceptance " << s.diagnostics.acceptance_rate << ", " << s.samples.size() << " samples\n";
    if (!s.diagnostics.warning.empty()) log << "warning: " << s.diagnostics.warning << '\n';
  } else if (cmd == "condition") {
    const SolitonResult q = ensemble_soliton(basis, p.coupling, p.mass_level);
    ChainConfig c = shell_chain_config(basis, p, q.q_coeffs, cfg.seed);
    if (cfg.step_beta > 0.0) c.step_beta = cfg.step_beta;
    c.n_steps = cfg.n_steps;
    c.n_burn = cfg.n_burn;
    c.thin = cfg.thin;
    const SampleStore s = run_conditioned_chain(basis, c);
    auto f = out.open("samples.csv");
    write_samples_csv(f, s, out.header());
    out.json("chain.json", diagnostics_json(s.diagnostics, c.step_beta));
    log << "acceptance " << s.diagnostics.acceptance_rate << ", " << s.samples.size() << " samples\n";
    if (!s.diagnostics.warning.empty()) log << "warning: " << s.diagnostics.warning << '\n';
  } else if (cmd == "free-energy") {
    ExperimentOptions o{cfg.n_samples, cfg.seed, cfg.threads};
    write_report(out, free_energy_experiment(basis, p, cfg.eps_grid, o), log);
  } else if (cmd == "entropy") {
    EntropyOptions o;
    o.n_samples = cfg.n_samples;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.r_fractions = cfg.r_fractions;
    write_report(out, entropy_experiment(basis, p, cfg.eps_grid, o), log);
  } else if (cmd == "concentration") {
    ConcentrationOptions o;
    o.n_samples = cfg.n_samples;
    o.seed = cfg.seed;
    o.threads = cfg.threads;
    o.p = cfg.orbit_p;
    o.n_burn = cfg.n_burn;
    o.thin = cfg.thin;
    write_report(out, concentration_experiment(basis, p, cfg.eps_grid, cfg.delta_grid, o), log);
  } else if (cmd == "oracle") {
    if (p.truncation > 1) throw ParameterError("oracle: truncation must be 0 or 1");
    std::ostringstream t;
    t << "observable,coupling,chem_potential,epsilon,mass_level,shell_width,oracle,closed_form\n";
    GibbsParams g = p;
    g.coupling = 0.0;
    g.chem_potential = 0.0;
    auto row = [&](const char* name, const GibbsParams& q, double v, std::optional<double> exact) {
      t << name << ',' << g17(q.coupling) << ',' << g17(q.chem_potential) << ',' << g17(q.epsilon) << ','
        << g17(q.mass_level) << ',' << g17(q.shell_width) << ',' << g17(v) << ','
        << (exact ? g17(*exact) : std::string()) << '\n';
    };
    row("partition", g, quadrature_oracle(basis, g, OracleObservable::Partition), 1.0);
    const double shell = quadrature_oracle(basis, g, OracleObservable::ShellProbability);
    const double exact = gaussian_shell_closed_form(g);
    row("shell_probability", g, shell, exact);
    row("partition", p, quadrature_oracle(basis, p, OracleObservable::Partition), std::nullopt);
    row("shell_probability", p, quadrature_oracle(basis, p, OracleObservable::ShellProbability), std::nullopt);
    row("conditional_moment", p, quadrature_oracle(basis, p, OracleObservable::ConditionalMoment), std::nullopt);
    row("grand_moment", p, quadrature_oracle(basis, p, OracleObservable::GrandMoment), std::nullopt);
    out.text("oracle.csv", t.str());
    log << "gaussian shell probability " << g17(shell) << " (closed form " << g17(exact) << ")\n";
  } else if (cmd == "calibrate-a") {
    CalibrationOptions o;
    o.margin = cfg.calibration_margin;
    o.seed = derive_seed(cfg.seed, 0xCA11B);
    const Calibration cal = calibrate_A(basis, p.coupling, cfg.calibration_probes, o);
    out.json("calibration.json", {{"coupling", p.coupling},
                                  {"truncation", p.truncation},
                                  {"a0", cal.a0},
                                  {"required", cal.required},
                                  {"worst_mass", cal.worst_mass},
                                  {"gns_constant", cal.gns_constant},
                                  {"probes", cal.probes}});
    log << "A0 = " << g17(cal.a0) << '\n';
  }
  manifest["files"] = out.files();
  manifest["out_dir"] = out.dir().string();
  manifest["resolved_config"] = cfg.to_json();
  manifest["resolved_config"]["params"]["chem_potential"] = cfg.params.chem_potential;
  return status;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grand-canonical and mass-shell Gibbs measures of the focusing cubic NLS with harmonic trap"};
  app.require_subcommand(1, 1);
  Overrides o;
  app.add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "base seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--threads", o.threads, "worker threads (results do not depend on it)");
  app.add_option("--eps", o.eps, "epsilon, or the epsilon grid for experiments")->delimiter(',');
  app.add_option("--mass", o.mass, "mass level D");
  app.add_option("--shell", o.shell, "shell half-width r, or the r schedule for entropy")->delimiter(',');
  app.add_option("--delta", o.delta, "orbit-distance thresholds")->delimiter(',');
  app.add_option("--n-samples", o.n_samples, "samples per cell");
  app.add_option("--truncation", o.truncation, "highest Hermite mode N");

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"soliton", "constrained minimizer Q and I(D)"},
      {"dstar", "mass threshold scan"},
      {"sample", "grand-canonical chain"},
      {"condition", "mass-shell chain"},
      {"free-energy", "free-energy experiment"},
      {"entropy", "shell-probability experiment"},
      {"concentration", "orbit-distance experiment"},
      {"oracle", "tensor-quadrature ground truth, N <= 1"},
      {"calibrate-a", "coercivity threshold for A"},
  };
  for (const auto& [name, desc] : commands) app.add_subcommand(name, desc)->fallthrough();

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  const auto t0 = std::chrono::steady_clock::now();
  nlohmann::json manifest = {{"command", cmd}, {"argv", argv}};
  manifest["versions"] = {{"gpgibbs", kVersion},
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)},
                          {"compiler", __VERSION__},
                          {"cxx", static_cast<long>(__cplusplus)}};
  int status = 0;
  std::optional<ExperimentConfig> cfg;
  try {
    cfg = resolve_config(o);
    manifest["config"] = cfg->to_json();
    manifest["config_text"] = cfg->serialize();
    manifest["config_hash"] = cfg->hash();
    manifest["seed"] = cfg->seed;
    status = dispatch(cmd, *cfg, out, manifest);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    status = 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    status = 1;
  }
  if (cfg) {
    manifest["exit_code"] = status;
    manifest["wall_time_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
      fs::create_directories(cfg->out_dir);
      std::ofstream(fs::path(cfg->out_dir) / "manifest.json") << manifest.dump(2) << '\n';
    } catch (const std::exception& e) {
      err << "error: cannot write manifest: " << e.what() << '\n';
      if (status == 0) status = 1;
    }
  }
  return status;
}

int run(const std::vector<std::string>& argv) { return run(argv, std::cout, std::cerr); }

}  // namespace gpgibbs
