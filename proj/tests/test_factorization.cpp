#include <doctest.h>

#include "dmf/factorization.hpp"
#include "dmf/measurements.hpp"
#include "dmf/rng.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace dmf;

namespace {

LabeledTask random_completion_task(int d, int dp, int m, std::uint64_t seed) {
  CounterRng rng(seed);
  Matrix Wstar(d, dp);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < dp; ++j) Wstar(i, j) = rng.normal();
  }
  return make_task(make_completion(d, dp, m, seed + 1), Wstar);
}

}  // namespace

TEST_CASE("factor stack shape checks and dims") {
  std::vector<Matrix> factors{Matrix::Zero(4, 3), Matrix::Zero(5, 4)};
  FactorStack stack(factors, {"gaussian", 1.0, 0});
  CHECK(stack.depth() == 2);
  CHECK(stack.dims() == std::vector<int>{3, 4, 5});
  std::vector<Matrix> bad{Matrix::Zero(4, 3), Matrix::Zero(5, 6)};
  CHECK_THROWS_AS(FactorStack(bad, {"gaussian", 1.0, 0}), std::invalid_argument);
}

TEST_CASE("identity init is exactly balanced with product alpha^N I") {
  const FactorStack stack = init_identity(3, 5, 0.2);
  CHECK(balancedness(stack) == 0.0);
  CHECK((product(stack) - std::pow(0.2, 3) * Matrix::Identity(5, 5)).norm() ==
        doctest::Approx(0.0));
}

TEST_CASE("gaussian init is reproducible and matches the naive product") {
  const std::vector<int> dims{4, 6, 6, 5};
  const FactorStack a = init_gaussian(3, dims, 0.3, 99);
  const FactorStack b = init_gaussian(3, dims, 0.3, 99);
  for (int j = 0; j < 3; ++j) CHECK((a.factor(j) - b.factor(j)).norm() == 0.0);
  std::vector<Matrix> factors;
  for (int j = 0; j < 3; ++j) factors.push_back(a.factor(j));
  CHECK((product(a) - oracles::naive_product(factors)).norm() <= 1e-14);
}

TEST_CASE("factor gradients match central finite differences") {
  // 20 random instances across depths 1..4, small dimensions.
  int instance = 0;
  for (int N = 1; N <= 4; ++N) {
    for (int rep = 0; rep < 5; ++rep, ++instance) {
      const int d = 4 + (instance % 5);
      const LabeledTask task = random_completion_task(d, d, 2 * d, 100 + instance);
      std::vector<int> dims(N + 1, d);
      const FactorStack stack = init_gaussian(N, dims, 0.4, 200 + instance);
      const auto grads = factor_gradients(stack, task);
      REQUIRE(static_cast<int>(grads.size()) == N);
      for (int j = 0; j < N; ++j) {
        const Matrix fd = oracles::factor_finite_diff(stack, task, j);
        const double rel = (grads[j] - fd).norm() / std::max(1.0, fd.norm());
        CHECK(rel <= 1e-6);
      }
    }
  }
}

TEST_CASE("gd_step updates all factors simultaneously") {
  const LabeledTask task = random_completion_task(5, 5, 10, 7);
  FactorStack stack = init_gaussian(2, {5, 5, 5}, 0.5, 8);
  const auto grads = factor_gradients(stack, task);
  const Matrix before0 = stack.factor(0), before1 = stack.factor(1);
  gd_step(stack, task, 0.1);
  CHECK((stack.factor(0) - (before0 - 0.1 * grads[0])).norm() <= 1e-14);
  CHECK((stack.factor(1) - (before1 - 0.1 * grads[1])).norm() <= 1e-14);
}

TEST_CASE("train reaches the stopping loss and reports convergence") {
  const LabeledTask task = random_completion_task(6, 6, 12, 21);
  FactorStack stack = init_gaussian(2, {6, 6, 6}, 0.3, 22);
  TrainConfig cfg;
  cfg.lr = 5e-2;
  cfg.max_iters = 50000;
  cfg.loss_stop = 1e-8;
  const TrajectoryRecord record = train(stack, task, cfg);
  CHECK(record.status == TerminalStatus::Converged);
  CHECK(record.final_loss < 1e-8);
  CHECK(loss(task, product(stack)) == doctest::Approx(record.final_loss));
}

TEST_CASE("train loss is monotone under a conservative learning rate") {
  const LabeledTask task = random_completion_task(6, 6, 18, 31);
  FactorStack stack = init_gaussian(3, {6, 6, 6, 6}, 0.3, 32);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_iters = 3000;
  cfg.loss_stop = 1e-12;
  cfg.snapshot_every = 10;
  const TrajectoryRecord record = train(stack, task, cfg);
  for (std::size_t i = 1; i < record.snapshots.size(); ++i) {
    CHECK(record.snapshots[i].loss <= record.snapshots[i - 1].loss + 1e-12);
  }
}

TEST_CASE("balancedness stays small along training from balanced init") {
  const LabeledTask task = random_completion_task(6, 6, 18, 41);
  FactorStack stack = init_identity(3, 6, 0.1);
  const double bal0 = balancedness(stack);
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_iters = 5000;
  cfg.loss_stop = 1e-12;
  train(stack, task, cfg);
  // Discrete steps drift off the exactly balanced manifold at O(lr).
  CHECK(bal0 == 0.0);
  CHECK(balancedness(stack) <= 0.05);
}

TEST_CASE("train flags divergence under an absurd learning rate") {
  const LabeledTask task = random_completion_task(6, 6, 18, 51);
  FactorStack stack = init_gaussian(2, {6, 6, 6}, 1.0, 52);
  TrainConfig cfg;
  cfg.lr = 10.0;
  cfg.max_iters = 1000;
  const TrajectoryRecord record = train(stack, task, cfg);
  CHECK(record.status == TerminalStatus::Diverged);
}

TEST_CASE("depth-1 balancedness is an error") {
  const FactorStack stack = init_identity(1, 4, 1.0);
  CHECK_THROWS_AS(balancedness(stack), std::invalid_argument);
}
