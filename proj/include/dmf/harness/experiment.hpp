#pragma once

#include "dmf/harness/config.hpp"
#include "dmf/linalg.hpp"
#include "dmf/measurements.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dmf::harness {

/// Random rank-r ground truth U V^T with i.i.d. standard normal factors.
Matrix generate_ground_truth(int d, int dp, int rank, std::uint64_t seed);

struct RunOptions {
  int jobs = 1;
  bool quiet = false;
  bool no_timestamp = false;
};

/// Metrics for one (m, depth, trial) cell.
struct ResultRow {
  int m = 0;
  int depth = 0;
  int trial = 0;  // -1 on aggregate rows
  bool agg = false;
  std::string status = "ok";
  long iterations = 0;
  double final_loss = 0.0;
  std::optional<double> reconstruction_error;
  double nuclear_norm_value = 0.0;
  double effective_rank_value = 0.0;
  double balancedness_value = 0.0;
  std::optional<double> baseline_reconstruction_error;
  std::optional<double> baseline_nuclear_norm;
  std::optional<double> baseline_effective_rank;
  // std-dev fields, present on aggregate rows when trials > 1
  std::optional<double> reconstruction_error_std;
  std::optional<double> nuclear_norm_std;
  std::optional<double> effective_rank_std;
};

/// Builds the task for a given measurement count, reproducibly from the
/// config seed.
LabeledTask build_task(const ExperimentConfig& cfg, int m);

/// Runs the full grid, writes the result CSV (and trajectory CSVs when
/// configured), returns the rows in deterministic order.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg,
                                      const RunOptions& opts);

/// Dynamics-only mode: integrates the product-matrix flow per depth and
/// writes trajectory CSVs next to the output path.
void run_flow(const ExperimentConfig& cfg, const RunOptions& opts);

/// Baseline-only mode: minimum-nuclear-norm solutions over the m grid.
void run_baseline(const ExperimentConfig& cfg, const RunOptions& opts);

/// Theory-verification suite (limit trend over an alpha grid, Schatten
/// counterexample, paired singular value curve fits). Prints one line per
/// check; returns true if all pass.
bool run_theory_checks(std::ostream& out);

void write_csv(const std::vector<ResultRow>& rows, const ExperimentConfig& cfg,
               const RunOptions& opts, std::ostream& out);

}  // namespace dmf::harness
