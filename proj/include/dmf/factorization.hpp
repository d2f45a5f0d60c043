#pragma once

#include "dmf/linalg.hpp"
#include "dmf/measurements.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dmf {

struct InitMeta {
  std::string scheme;  // "gaussian" | "identity"
  double scale = 0.0;  // std or alpha
  std::uint64_t seed = 0;
};

/// Ordered factors W_1..W_N with W_j of shape dims[j] x dims[j-1]; the
/// product matrix is W_N ... W_1 of shape dims[N] x dims[0].
class FactorStack {
 public:
  FactorStack(std::vector<Matrix> factors, InitMeta meta);

  int depth() const { return static_cast<int>(factors_.size()); }
  std::vector<int> dims() const;
  const Matrix& factor(int j) const { return factors_.at(j); }  // j = 0..N-1 is W_{j+1}
  Matrix& factor(int j) { return factors_.at(j); }
  const InitMeta& init_meta() const { return meta_; }

 private:
  std::vector<Matrix> factors_;
  InitMeta meta_;
};

/// Every factor entry i.i.d. N(0, stddev^2). dims has N+1 entries d_0..d_N.
FactorStack init_gaussian(int N, const std::vector<int>& dims, double stddev,
                          std::uint64_t seed);

/// Each W_j = alpha * I (square, exactly balanced, product alpha^N * I).
FactorStack init_identity(int N, int d, double alpha);

/// The product matrix W_N ... W_1.
Matrix product(const FactorStack& stack);

/// max_j || W_{j+1}^T W_{j+1} - W_j W_j^T ||_F. Undefined for N = 1.
double balancedness(const FactorStack& stack);

/// Per-factor gradients of phi(W_1..W_N) = loss(W_N...W_1).
std::vector<Matrix> factor_gradients(const FactorStack& stack,
                                     const LabeledTask& task);

/// One full-batch gradient descent step; all factors updated simultaneously
/// from the pre-step stack. Throws on non-finite gradients.
void gd_step(FactorStack& stack, const LabeledTask& task, double lr);

struct RecordFlags {
  bool singular_values = true;
  int top_k = 10;
  bool alignment = true;
  bool balancedness = true;
  bool nuclear_norm = true;
  bool effective_rank = true;
};

struct TrainConfig {
  double lr = 1e-3;
  long max_iters = 1000000;
  double loss_stop = 1e-6;
  long snapshot_every = 100;
  double divergence_guard = 1e12;
  RecordFlags record;
};

enum class TerminalStatus { Converged, IterCap, Diverged };

struct Snapshot {
  long iteration = 0;
  double loss = 0.0;
  Vector signed_singular_values;  // tracked top-k, empty if not recorded
  double align_on_mean = 0.0, align_off_mean = 0.0;
  double balancedness = 0.0;
  double nuclear_norm = 0.0;
  double effective_rank = 0.0;
  double reconstruction_error = 0.0;  // 0 when the task has no ground truth
};

struct TrajectoryRecord {
  std::vector<Snapshot> snapshots;
  TerminalStatus status = TerminalStatus::IterCap;
  long iterations = 0;
  double final_loss = 0.0;
};

/// Runs gd_step until loss < cfg.loss_stop, max_iters, or divergence; records
/// snapshots every cfg.snapshot_every iterations (plus the final state).
TrajectoryRecord train(FactorStack& stack, const LabeledTask& task,
                       const TrainConfig& cfg);

}  // namespace dmf
