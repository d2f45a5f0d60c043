// Test-only reference implementations, deliberately naive.
#pragma once

#include "dmf/factorization.hpp"
#include "dmf/measurements.hpp"

#include <functional>
#include <vector>

namespace oracles {

using dmf::Matrix;
using dmf::Vector;

// Central finite differences of a scalar function of one matrix argument.
inline Matrix finite_diff(const std::function<double(const Matrix&)>& f,
                          const Matrix& at, double h = 1e-5) {
  Matrix g(at.rows(), at.cols());
  for (Eigen::Index i = 0; i < at.rows(); ++i) {
    for (Eigen::Index j = 0; j < at.cols(); ++j) {
      Matrix plus = at, minus = at;
      plus(i, j) += h;
      minus(i, j) -= h;
      g(i, j) = (f(plus) - f(minus)) / (2.0 * h);
    }
  }
  return g;
}

// Central finite differences of phi(W_1..W_N) = loss(W_N ... W_1) in one factor.
inline Matrix factor_finite_diff(const dmf::FactorStack& stack,
                                 const dmf::LabeledTask& task, int j,
                                 double h = 1e-5) {
  std::vector<Matrix> factors;
  for (int k = 0; k < stack.depth(); ++k) factors.push_back(stack.factor(k));
  auto eval = [&](const Matrix& Wj) {
    Matrix W = j == 0 ? Wj : factors[0];
    for (int k = 1; k < stack.depth(); ++k) W = (k == j ? Wj : factors[k]) * W;
    return dmf::loss(task, W);
  };
  return finite_diff(eval, factors[j], h);
}

// Left-to-right product, no reuse.
inline Matrix naive_product(const std::vector<Matrix>& factors) {
  Matrix W = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) W = factors[k] * W;
  return W;
}

// Projected subgradient descent for min ||W||_* s.t. A(W) = y. Slow but
// independent of the Douglas-Rachford implementation under test.
inline Matrix nuclear_subgradient_oracle(const dmf::LabeledTask& task,
                                         int iters = 20000, double step0 = 1.0) {
  const Matrix gram = task.op.gram();
  Eigen::LDLT<Matrix> ldlt(gram);
  auto project = [&](const Matrix& Z) -> Matrix {
    const Vector resid = task.op.apply(Z) - task.y;
    return Z - task.op.adjoint(ldlt.solve(resid));
  };
  Matrix W = project(Matrix::Zero(task.op.rows(), task.op.cols()));
  Matrix best = W;
  double best_val = dmf::nuclear_norm(W);
  for (int k = 1; k <= iters; ++k) {
    Eigen::JacobiSVD<Matrix> decomp(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix sub = decomp.matrixU() * decomp.matrixV().transpose();
    W = project(W - (step0 / std::sqrt(static_cast<double>(k))) * sub);
    const double val = dmf::nuclear_norm(W);
    if (val < best_val) {
      best_val = val;
      best = W;
    }
  }
  return best;
}

}  // namespace oracles
