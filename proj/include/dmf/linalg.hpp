#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <vector>

namespace dmf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thin SVD with signed singular values: U (d x k) and V (d' x k) have
/// orthonormal columns, S holds k = min(d, d') values sorted descending by
/// magnitude. Signs are permitted so that singular curves can be tracked
/// continuously through zero.
struct SvdTriple {
  Matrix U;
  Vector S;
  Matrix V;

  Matrix reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

/// Throws std::invalid_argument if any entry is NaN/Inf.
void require_finite(const Matrix& M, const char* what);

/// Deterministic thin SVD. Tie-break: descending |sigma|, first
/// non-negligible component of each left singular vector made positive
/// (the matching sign is absorbed into the right vector).
SvdTriple svd(const Matrix& M, double tol = 1e-10);

/// Singular values only, descending.
Vector singular_values(const Matrix& M);

/// M^alpha for symmetric PSD M, alpha >= 0. alpha = 0 returns identity by
/// convention. Eigenvalues in [-1e-10, 0) are clamped to zero; anything more
/// negative, or asymmetry beyond tolerance, is an error.
Matrix psd_power(const Matrix& M, double alpha);

/// Sum of singular value magnitudes.
double nuclear_norm(const Matrix& M);

/// ||M||_{S_p}^p = sum_r sigma_r^p for p in (0, 1].
double schatten_quasi_norm_p(const Matrix& M, double p);

/// exp of the Shannon entropy of the normalized singular value distribution.
/// Undefined (throws) for the zero matrix.
double effective_rank(const Matrix& M);

/// ||W - Wstar||_F / ||Wstar||_F.
double reconstruction_error(const Matrix& W, const Matrix& Wstar);

/// Numerical rank at threshold 1e-9 * sigma_max.
int numerical_rank(const Matrix& M, double rel_tol = 1e-9);

/// Tracks singular value/vector identities across consecutive snapshots of an
/// evolving matrix. Curves are matched to the previous snapshot by maximal
/// inner product of the left singular vectors (overriding sort order when
/// curves cross), and the matched sign yields a signed singular value per
/// curve.
class SingularTracker {
 public:
  /// Feed the next snapshot; returns signed singular values ordered by curve
  /// identity (the ordering fixed at the first snapshot).
  Vector track(const SvdTriple& next);

  bool initialized() const { return initialized_; }

 private:
  Matrix prev_U_;
  Matrix prev_V_;
  bool initialized_ = false;
};

}  // namespace dmf
