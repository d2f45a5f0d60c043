#include "dmf/factorization.hpp"

#include "dmf/flow.hpp"
#include "dmf/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dmf {

FactorStack::FactorStack(std::vector<Matrix> factors, InitMeta meta)
    : factors_(std::move(factors)), meta_(std::move(meta)) {
  if (factors_.empty()) throw std::invalid_argument("FactorStack: empty");
  for (std::size_t j = 0; j + 1 < factors_.size(); ++j) {
    if (factors_[j + 1].cols() != factors_[j].rows()) {
      throw std::invalid_argument("FactorStack: adjacent shape mismatch");
    }
  }
}

std::vector<int> FactorStack::dims() const {
  std::vector<int> d;
  d.push_back(static_cast<int>(factors_.front().cols()));
  for (const auto& W : factors_) d.push_back(static_cast<int>(W.rows()));
  return d;
}

FactorStack init_gaussian(int N, const std::vector<int>& dims, double stddev,
                          std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("init_gaussian: N must be >= 1");
  if (static_cast<int>(dims.size()) != N + 1) {
    throw std::invalid_argument("init_gaussian: dims must have N + 1 entries");
  }
  if (stddev <= 0.0) throw std::invalid_argument("init_gaussian: stddev must be > 0");
  CounterRng rng(seed);
  std::vector<Matrix> factors;
  factors.reserve(N);
  for (int j = 0; j < N; ++j) {
    Matrix W(dims[j + 1], dims[j]);
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = stddev * rng.normal();
    }
    factors.push_back(std::move(W));
  }
  return FactorStack(std::move(factors), {"gaussian", stddev, seed});
}

FactorStack init_identity(int N, int d, double alpha) {
  if (N < 1 || d < 1) throw std::invalid_argument("init_identity: bad dimensions");
  if (alpha <= 0.0) throw std::invalid_argument("init_identity: alpha must be > 0");
  std::vector<Matrix> factors(N, alpha * Matrix::Identity(d, d));
  return FactorStack(std::move(factors), {"identity", alpha, 0});
}

Matrix product(const FactorStack& stack) {
  Matrix W = stack.factor(0);
  for (int j = 1; j < stack.depth(); ++j) W = stack.factor(j) * W;
  return W;
}

double balancedness(const FactorStack& stack) {
  if (stack.depth() < 2) {
    throw std::invalid_argument("balancedness: undefined for depth 1");
  }
  double worst = 0.0;
  for (int j = 0; j + 1 < stack.depth(); ++j) {
    const Matrix lhs = stack.factor(j + 1).transpose() * stack.factor(j + 1);
    const Matrix rhs = stack.factor(j) * stack.factor(j).transpose();
    worst = std::max(worst, (lhs - rhs).norm());
  }
  return worst;
}

std::vector<Matrix> factor_gradients(const FactorStack& stack,
                                     const LabeledTask& task) {
  const int N = stack.depth();
  // prefix[j] = W_j ... W_1 (prefix[0] = I), suffix[j] = W_N ... W_{j+2}.
  std::vector<Matrix> prefix(N + 1);
  prefix[0] = Matrix::Identity(stack.factor(0).cols(), stack.factor(0).cols());
  for (int j = 0; j < N; ++j) prefix[j + 1] = stack.factor(j) * prefix[j];

  const Matrix grad = loss_grad(task, prefix[N]);

  std::vector<Matrix> suffix(N + 1);
  suffix[N] = Matrix::Identity(stack.factor(N - 1).rows(), stack.factor(N - 1).rows());
  for (int j = N - 1; j > 0; --j) suffix[j] = suffix[j + 1] * stack.factor(j);

  std::vector<Matrix> out(N);
  for (int j = 0; j < N; ++j) {
    out[j] = suffix[j + 1].transpose() * grad * prefix[j].transpose();
  }
  return out;
}

void gd_step(FactorStack& stack, const LabeledTask& task, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("gd_step: lr must be > 0");
  const auto grads = factor_gradients(stack, task);
  for (const auto& g : grads) {
    if (!g.allFinite()) throw std::runtime_error("gd_step: non-finite gradient");
  }
  for (int j = 0; j < stack.depth(); ++j) stack.factor(j) -= lr * grads[j];
}

namespace {

Snapshot take_snapshot(long iter, double loss_value, const FactorStack& stack,
                       const Matrix& W, const LabeledTask& task,
                       const RecordFlags& flags, SingularTracker& tracker) {
  Snapshot snap;
  snap.iteration = iter;
  snap.loss = loss_value;
  const bool need_svd = flags.singular_values || flags.alignment;
  if (need_svd) {
    const SvdTriple decomp = svd(W);
    if (flags.singular_values) {
      const Vector tracked = tracker.track(decomp);
      const int k = std::min<int>(flags.top_k, static_cast<int>(tracked.size()));
      snap.signed_singular_values = tracked.head(k);
    }
    if (flags.alignment) {
      const AlignmentDiagnostic diag = alignment_diagnostic(decomp, loss_grad(task, W));
      snap.align_on_mean = diag.on_diag_mean;
      snap.align_off_mean = diag.off_diag_mean;
    }
  }
  if (flags.balancedness && stack.depth() >= 2) snap.balancedness = balancedness(stack);
  if (flags.nuclear_norm) snap.nuclear_norm = nuclear_norm(W);
  if (flags.effective_rank && W.norm() > 0.0) snap.effective_rank = effective_rank(W);
  if (task.Wstar) snap.reconstruction_error = reconstruction_error(W, *task.Wstar);
  return snap;
}

}  // namespace

TrajectoryRecord train(FactorStack& stack, const LabeledTask& task,
                       const TrainConfig& cfg) {
  if (cfg.loss_stop <= 0.0) throw std::invalid_argument("train: loss_stop must be > 0");
  TrajectoryRecord record;
  SingularTracker tracker;

  Matrix W = product(stack);
  double current = loss(task, W);
  record.snapshots.push_back(
      take_snapshot(0, current, stack, W, task, cfg.record, tracker));

  long iter = 0;
  for (; iter < cfg.max_iters; ++iter) {
    if (current < cfg.loss_stop) {
      record.status = TerminalStatus::Converged;
      break;
    }
    try {
      gd_step(stack, task, cfg.lr);
    } catch (const std::runtime_error&) {
      record.status = TerminalStatus::Diverged;
      break;
    }
    W = product(stack);
    current = loss(task, W);
    if (!std::isfinite(current) || current > cfg.divergence_guard) {
      record.status = TerminalStatus::Diverged;
      break;
    }
    if ((iter + 1) % cfg.snapshot_every == 0) {
      record.snapshots.push_back(
          take_snapshot(iter + 1, current, stack, W, task, cfg.record, tracker));
    }
  }
  if (iter == cfg.max_iters && record.status != TerminalStatus::Converged &&
      record.status != TerminalStatus::Diverged) {
    record.status = TerminalStatus::IterCap;
  }

  record.iterations = iter;
  if (record.status != TerminalStatus::Diverged &&
      record.snapshots.back().iteration != iter) {
    record.snapshots.push_back(
        take_snapshot(iter, current, stack, W, task, cfg.record, tracker));
  }
  record.final_loss = record.snapshots.back().loss;
  return record;
}

}  // namespace dmf
