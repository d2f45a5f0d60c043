#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dmf::harness {

/// Declarative description of one experiment grid: task family, model grid,
/// training settings, optional flow integration and baseline comparison.
struct ExperimentConfig {
  // [task]
  std::string task_kind = "completion";  // completion | sensing | prop1 | ratings
  int d = 50, dp = 50;
  int rank = 3;
  std::vector<int> m_grid;
  std::uint64_t seed = 1;
  std::string ratings_path;

  // [model]
  std::vector<int> depths = {2};
  std::string init_scheme = "gaussian";  // gaussian | identity
  double init_scale = 1e-3;
  int hidden = 0;  // 0 = full-dimensional (min(d, d'))

  // [train]
  double lr = 1e-3;
  long max_iters = 1000000;
  double loss_stop = 1e-6;
  long snapshot_every = 100;

  // [flow]
  bool flow_enabled = false;
  double flow_dt = 1e-4;
  double flow_T = 1.0;
  std::string flow_scheme = "rk4";

  // [baseline]
  bool baseline_nuclear = false;
  bool baseline_psd = false;

  // [output]
  std::string output_path = "results.csv";
  int trials = 1;
  bool trajectories = false;
};

/// Parses the `[section]` / `key = value` config format. Lines starting with
/// '#' are comments. Unknown keys are errors (configs are provenance).
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Applies a CLI override of the form "section.key=value".
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

/// Validates grid invariants (m <= d * d', trials >= 1, non-empty grids).
void validate(const ExperimentConfig& cfg);

}  // namespace dmf::harness
