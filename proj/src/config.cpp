#include "gpgibbs/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gpgibbs/errors.hpp"

namespace gpgibbs {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParameterError("config: " + key + ": not a number: " + s);
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& s) {
  Int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParameterError("config: " + key + ": not an integer: " + s);
  return v;
}

std::vector<double> to_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"params.epsilon", [](auto& c, auto& v) { c.params.epsilon = to_double("epsilon", v); }},
      {"params.coupling", [](auto& c, auto& v) { c.params.coupling = to_double("coupling", v); }},
      {"params.chem_potential",
       [](auto& c, auto& v) {
         c.auto_chem_potential = v == "auto";
         c.params.chem_potential = c.auto_chem_potential ? 0.0 : to_double("chem_potential", v);
       }},
      {"params.truncation", [](auto& c, auto& v) { c.params.truncation = to_int<int>("truncation", v); }},
      {"params.mass_level", [](auto& c, auto& v) { c.params.mass_level = to_double("mass_level", v); }},
      {"params.shell_width", [](auto& c, auto& v) { c.params.shell_width = to_double("shell_width", v); }},
      {"grids.eps", [](auto& c, auto& v) { c.eps_grid = to_list("eps", v); }},
      {"grids.r_fractions", [](auto& c, auto& v) { c.r_fractions = to_list("r_fractions", v); }},
      {"grids.delta", [](auto& c, auto& v) { c.delta_grid = to_list("delta", v); }},
      {"grids.mass_scan", [](auto& c, auto& v) { c.mass_scan = to_list("mass_scan", v); }},
      {"chain.step_beta", [](auto& c, auto& v) { c.step_beta = to_double("step_beta", v); }},
      {"chain.n_steps", [](auto& c, auto& v) { c.n_steps = to_int<int>("n_steps", v); }},
      {"chain.n_burn", [](auto& c, auto& v) { c.n_burn = to_int<int>("n_burn", v); }},
      {"chain.thin", [](auto& c, auto& v) { c.thin = to_int<int>("thin", v); }},
      {"chain.orbit_p", [](auto& c, auto& v) { c.orbit_p = to_double("orbit_p", v); }},
      {"calibration.probes", [](auto& c, auto& v) { c.calibration_probes = to_int<int>("probes", v); }},
      {"calibration.margin", [](auto& c, auto& v) { c.calibration_margin = to_double("margin", v); }},
      {"run.n_samples", [](auto& c, auto& v) { c.n_samples = to_int<long>("n_samples", v); }},
      {"run.seed", [](auto& c, auto& v) { c.seed = to_int<std::uint64_t>("seed", v); }},
      {"run.threads", [](auto& c, auto& v) { c.threads = to_int<int>("threads", v); }},
      {"run.out", [](auto& c, auto& v) { c.out_dir = v; }},
  };
  return table;
}

bool strictly_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x > 0.0; });
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParameterError("config line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParameterError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ParameterError("config line " + std::to_string(lineno) + ": unknown key " + key);
    it->second(c, trim(line.substr(eq + 1)));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream o;
  o << "[params]\n"
    << "epsilon = " << fmt(params.epsilon) << '\n'
    << "coupling = " << fmt(params.coupling) << '\n'
    << "chem_potential = " << (auto_chem_potential ? std::string("auto") : fmt(params.chem_potential)) << '\n'
    << "truncation = " << params.truncation << '\n'
    << "mass_level = " << fmt(params.mass_level) << '\n'
    << "shell_width = " << fmt(params.shell_width) << '\n'
    << "\n[grids]\n"
    << "eps = " << fmt_list(eps_grid) << '\n'
    << "r_fractions = " << fmt_list(r_fractions) << '\n'
    << "delta = " << fmt_list(delta_grid) << '\n'
    << "mass_scan = " << fmt_list(mass_scan) << '\n'
    << "\n[chain]\n"
    << "step_beta = " << fmt(step_beta) << '\n'
    << "n_steps = " << n_steps << '\n'
    << "n_burn = " << n_burn << '\n'
    << "thin = " << thin << '\n'
    << "orbit_p = " << fmt(orbit_p) << '\n'
    << "\n[calibration]\n"
    << "probes = " << calibration_probes << '\n'
    << "margin = " << fmt(calibration_margin) << '\n'
    << "\n[run]\n"
    << "n_samples = " << n_samples << '\n'
    << "seed = " << seed << '\n'
    << "threads = " << threads << '\n'
    << "out = " << out_dir << '\n';
  return o.str();
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json chem = auto_chem_potential ? nlohmann::json("auto") : nlohmann::json(params.chem_potential);
  return {{"params",
           {{"epsilon", params.epsilon},
            {"coupling", params.coupling},
            {"chem_potential", chem},
            {"truncation", params.truncation},
            {"mass_level", params.mass_level},
            {"shell_width", params.shell_width}}},
          {"grids", {{"eps", eps_grid}, {"r_fractions", r_fractions}, {"delta", delta_grid}, {"mass_scan", mass_scan}}},
          {"chain",
           {{"step_beta", step_beta}, {"n_steps", n_steps}, {"n_burn", n_burn}, {"thin", thin}, {"orbit_p", orbit_p}}},
          {"calibration", {{"probes", calibration_probes}, {"margin", calibration_margin}}},
          {"run", {{"n_samples", n_samples}, {"seed", seed}, {"threads", threads}, {"out", out_dir}}}};
}

std::string ExperimentConfig::hash() const {
  // Threads and the output directory do not change any result.
  ExperimentConfig c = *this;
  c.threads = 1;
  c.out_dir.clear();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : c.serialize()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ExperimentConfig::validate() const {
  params.validate();
  if (params.truncation > 256) throw ParameterError("config: truncation must be <= 256");
  if (eps_grid.empty() || !strictly_positive(eps_grid)) throw ParameterError("config: eps grid must be positive");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (eps_grid[i] == eps_grid[j]) throw ParameterError("config: eps grid has repeated values");
    }
  }
  if (!strictly_positive(r_fractions) ||
      std::any_of(r_fractions.begin(), r_fractions.end(), [](double f) { return f >= 1.0; })) {
    throw ParameterError("config: r_fractions must lie in (0, 1)");
  }
  if (std::any_of(delta_grid.begin(), delta_grid.end(), [](double d) { return !(d >= 0.0); })) {
    throw ParameterError("config: delta grid must be nonnegative");
  }
  if (mass_scan.empty() || !strictly_positive(mass_scan) || !std::is_sorted(mass_scan.begin(), mass_scan.end())) {
    throw ParameterError("config: mass_scan must be positive and increasing");
  }
  if (!(step_beta >= 0.0 && step_beta <= 1.0)) throw ParameterError("config: step_beta must lie in [0, 1]");
  if (n_burn < 0 || n_steps <= n_burn) throw ParameterError("config: need 0 <= n_burn < n_steps");
  if (thin < 1) throw ParameterError("config: thin must be >= 1");
  if (!(orbit_p >= 1.0)) throw ParameterError("config: orbit_p must be >= 1");
  if (calibration_probes < 1000) throw ParameterError("config: calibration probes must be >= 1000");
  if (!(calibration_margin >= 0.0)) throw ParameterError("config: calibration margin must be >= 0");
  if (n_samples < 1) throw ParameterError("config: n_samples must be >= 1");
  if (threads < 1) throw ParameterError("config: threads must be >= 1");
}

}  // namespace gpgibbs
