#pragma once

#include "dmf/linalg.hpp"
#include "dmf/measurements.hpp"

namespace dmf {

struct NuclearOptions {
  bool psd = false;
  long max_iters = 50000;
  double feas_tol = 1e-6;
  double step = 1.0;  // Douglas-Rachford prox parameter
};

struct NuclearSolution {
  Matrix W;
  double constraint_residual = 0.0;
  double nuclear_value = 0.0;
  long iterations = 0;
  bool psd_constrained = false;
};

/// Minimum-nuclear-norm matrix subject to A(W) = y, by Douglas-Rachford
/// splitting of the affine projection against singular value shrinkage (or,
/// with psd = true, against the linear-cost PSD prox, since nuclear norm is
/// trace on the PSD cone). Throws if infeasible after max_iters.
NuclearSolution min_nuclear_norm(const LabeledTask& task, const NuclearOptions& opts = {});

struct CertificateReport {
  double max_eig_of_adjoint = 0.0;
  double psd_slack = 0.0;  // <I - adj(nu), Wstar>
  bool feasible = false;
};

/// Checks the dual certificate nu for nuclear-norm optimality of a PSD
/// feasible Wstar: feasible iff lambda_max(adj(nu)) <= 1 + 1e-8, and slack
/// near zero certifies optimality over the PSD feasible set.
CertificateReport dual_certificate_check(const LabeledTask& task, const Matrix& Wstar,
                                         const Vector& nu, double feas_tol = 1e-6);

struct SchattenComparison {
  Matrix W_hat;             // the off-diagonal perturbation of diag(1,1,0,...)
  double feas_residual;     // constraint residual of W_hat
  double min_eigenvalue;    // of W_hat (PSD check)
  double schatten_hat;      // ||W_hat||_{S_p}^p
  double schatten_nuclear;  // ||diag(1,1,0,...)||_{S_p}^p = 2
  bool strictly_smaller;
};

/// Builds the rank-2 perturbation showing the minimum-nuclear solution of the
/// diagonal constraint family is not a local Schatten-p minimizer.
SchattenComparison schatten_counterexample(int d, double eps, double p);

}  // namespace dmf
