#include "dmf/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dmf {

namespace {

// Exact projection onto the affine set {A(W) = y}, via the Gram system of
// the measurement family.
class AffineProjector {
 public:
  explicit AffineProjector(const LabeledTask& task) : task_(task) {
    ldlt_.compute(task.op.gram());
    if (ldlt_.info() != Eigen::Success) {
      throw std::runtime_error("min_nuclear_norm: singular measurement Gram matrix");
    }
  }

  Matrix operator()(const Matrix& Z) const {
    const Vector resid = task_.op.apply(Z) - task_.y;
    return Z - task_.op.adjoint(ldlt_.solve(resid));
  }

 private:
  const LabeledTask& task_;
  Eigen::LDLT<Matrix> ldlt_;
};

// prox of gamma * ||.||_* : singular value soft threshold.
Matrix shrink_singular_values(const Matrix& Z, double gamma) {
  Eigen::JacobiSVD<Matrix> decomp(Z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = decomp.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = std::max(s[i] - gamma, 0.0);
  return decomp.matrixU() * s.asDiagonal() * decomp.matrixV().transpose();
}

// prox of gamma * <I, .> restricted to the PSD cone (nuclear norm equals
// trace there): clamp the eigenvalues of the symmetrized shift.
Matrix psd_trace_prox(const Matrix& Z, double gamma) {
  const Matrix sym = 0.5 * (Z + Z.transpose()) - gamma * Matrix::Identity(Z.rows(), Z.cols());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector lam = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

NuclearSolution min_nuclear_norm(const LabeledTask& task, const NuclearOptions& opts) {
  if (opts.psd && task.op.rows() != task.op.cols()) {
    throw std::invalid_argument("min_nuclear_norm: PSD variant needs square matrices");
  }
  const AffineProjector project(task);
  const double gamma = opts.step;

  Matrix Z = project(Matrix::Zero(task.op.rows(), task.op.cols()));
  Matrix X = Z;
  const double stop_tol = opts.feas_tol;
  long iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (; iter < opts.max_iters; ++iter) {
    X = project(Z);
    const Matrix Y = opts.psd ? psd_trace_prox(2.0 * X - Z, gamma)
                              : shrink_singular_values(2.0 * X - Z, gamma);
    Z += Y - X;
    gap = (Y - X).norm() / std::max(1.0, X.norm());
    if (gap < stop_tol) break;
  }
  if (gap >= stop_tol && !(gap < opts.feas_tol)) {
    throw std::runtime_error("min_nuclear_norm: no convergence after " +
                             std::to_string(opts.max_iters) +
                             " iterations, splitting gap " + std::to_string(gap));
  }

  NuclearSolution sol;
  sol.W = X;  // affine-feasible by construction
  sol.constraint_residual = (task.op.apply(X) - task.y).norm();
  sol.nuclear_value = nuclear_norm(X);
  sol.iterations = iter;
  sol.psd_constrained = opts.psd;
  return sol;
}

CertificateReport dual_certificate_check(const LabeledTask& task, const Matrix& Wstar,
                                         const Vector& nu, double feas_tol) {
  const double primal_resid = (task.op.apply(Wstar) - task.y).norm();
  if (primal_resid > feas_tol) {
    throw std::invalid_argument("dual_certificate_check: Wstar infeasible, residual " +
                                std::to_string(primal_resid));
  }
  const Matrix Anu = task.op.adjoint(nu);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (Anu + Anu.transpose()));
  CertificateReport report;
  report.max_eig_of_adjoint = eig.eigenvalues().maxCoeff();
  report.psd_slack =
      (Matrix::Identity(Anu.rows(), Anu.cols()) - Anu).cwiseProduct(Wstar).sum();
  report.feasible = report.max_eig_of_adjoint <= 1.0 + 1e-8;
  return report;
}

SchattenComparison schatten_counterexample(int d, double eps, double p) {
  if (d < 3) throw std::invalid_argument("schatten_counterexample: d must be >= 3");
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::invalid_argument("schatten_counterexample: eps must be in (0, 1)");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("schatten_counterexample: p must be in (0, 1)");
  }
  Matrix W_hat = Matrix::Zero(d, d);
  W_hat(0, 0) = W_hat(1, 1) = 1.0;
  W_hat(0, 1) = W_hat(1, 0) = eps;

  const LabeledTask task = make_prop1_instance(d);

  SchattenComparison cmp;
  cmp.W_hat = W_hat;
  cmp.feas_residual = (task.op.apply(W_hat) - task.y).norm();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(W_hat);
  cmp.min_eigenvalue = eig.eigenvalues().minCoeff();
  cmp.schatten_hat = schatten_quasi_norm_p(W_hat, p);
  Matrix W_bar = Matrix::Zero(d, d);
  W_bar(0, 0) = W_bar(1, 1) = 1.0;
  cmp.schatten_nuclear = schatten_quasi_norm_p(W_bar, p);
  cmp.strictly_smaller = cmp.schatten_hat < cmp.schatten_nuclear;
  return cmp;
}

}  // namespace dmf
