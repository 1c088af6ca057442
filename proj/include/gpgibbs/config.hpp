#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpgibbs/fields.hpp"

namespace gpgibbs {

/// Everything a CLI run depends on. Text form:
///
///   [params]
///   epsilon = 0.5
///   chem_potential = auto      # or a number
///   [grids]
///   eps = 0.4, 0.2, 0.1
///
/// Sections: params, grids, chain, calibration, run. Unknown sections or keys
/// are rejected. `#` starts a comment.
struct ExperimentConfig {
  GibbsParams params;
  bool auto_chem_potential = true;   ///< calibrate A before use

  std::vector<double> eps_grid{0.4, 0.2, 0.1};
  std::vector<double> r_fractions{0.2, 0.1, 0.05};
  std::vector<double> delta_grid{0.2, 0.5};
  std::vector<double> mass_scan{1, 2, 3, 4, 4.5, 4.75, 5, 5.25, 5.5, 6, 7, 8};

  double step_beta = 0.0;            ///< 0 selects default_step_beta(eps)
  int n_steps = 20000;
  int n_burn = 2000;
  int thin = 1;
  double orbit_p = 4.0;

  int calibration_probes = 1000;
  double calibration_margin = 0.1;

  long n_samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";

  /// ParameterError with the offending key on any malformed or unknown entry.
  [[nodiscard]] static ExperimentConfig parse(const std::string& text);
  [[nodiscard]] static ExperimentConfig load(const std::string& path);
  /// Canonical text: every key, fixed order, doubles with 17 digits.
  [[nodiscard]] std::string serialize() const;
  [[nodiscard]] nlohmann::json to_json() const;
  /// FNV-1a of serialize(), as 16 hex digits.
  [[nodiscard]] std::string hash() const;
  void validate() const;
};

}  // namespace gpgibbs
