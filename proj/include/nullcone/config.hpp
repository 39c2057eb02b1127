#pragma once

// Experiment configuration: flat "key = value" lines grouped under [section] headers.
// '#' and ';' start comments. Keys are addressed as section.key.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nullcone {

struct ExperimentConfig {
  std::string experiment;

  // [grid]
  std::vector<int> N{128};
  double ratio = 0.9;
  double v_uniform = 0.1;
  double v_min = 1e-8;
  double eps = 0.05;
  int lmax = 0;

  // [data]
  double delta = 0.1;
  double delta_prime = 0.5;
  double amplitude = 1.0;
  std::string profile = "symmetric";  ///< symmetric, l1, smooth
  std::string data_file;

  // [nonlinearity]
  double C0 = 0;
  std::array<double, 4> C1{0, 0, 0, 0};

  // [run]
  int K = 6;
  int trials = 1000;
  std::uint64_t seed = 1;
  std::string out_dir;
  int cell_sweeps = 2;

  // [energy]
  double V_lo = 0.1;
  double V_hi = 1.0;
  double region_u = 0.25;  ///< comparison region u <= region_u, v >= region_v
  double region_v = 0.25;

  // [mkg]
  double U_star = 1.0;
  double u_max = 11.0;
  std::string family = "finite";  ///< finite, borderline
  double tail_limit = 0.1;

  /// [assert] entries; a driver checks the ones it knows.
  std::map<std::string, double> assertions;

  /// Every key that was set, section.key -> value text, for the manifest.
  std::map<std::string, std::string> raw;

  std::optional<double> assertion(const std::string& key) const;
  void validate() const;
};

/// Parses config text; throws ParseError with a line number.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::string& path);

/// Applies one section.key = value override (used for defaults and command-line flags).
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text of the resolved configuration, every known key in a fixed order.
std::string config_echo(const ExperimentConfig& cfg);

}  // namespace nullcone
