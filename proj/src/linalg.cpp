#include "dmf/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace dmf {

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

SvdTriple svd(const Matrix& M, double tol) {
  require_finite(M, "svd");
  Eigen::JacobiSVD<Matrix> solver(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("svd: Jacobi iteration did not converge");
  }
  SvdTriple out{solver.matrixU(), solver.singularValues(), solver.matrixV()};

  // Sign convention: first entry of each left vector with magnitude above
  // tol * ||u||_inf is made positive; flips are absorbed into V.
  const Eigen::Index k = out.S.size();
  for (Eigen::Index r = 0; r < k; ++r) {
    const double scale = out.U.col(r).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < out.U.rows(); ++i) {
      const double e = out.U(i, r);
      if (std::abs(e) > tol * scale) {
        if (e < 0.0) {
          out.U.col(r) = -out.U.col(r);
          out.V.col(r) = -out.V.col(r);
        }
        break;
      }
    }
  }
  return out;
}

Vector singular_values(const Matrix& M) {
  require_finite(M, "singular_values");
  return Eigen::JacobiSVD<Matrix>(M).singularValues();
}

Matrix psd_power(const Matrix& M, double alpha) {
  require_finite(M, "psd_power");
  if (alpha < 0.0) throw std::invalid_argument("psd_power: alpha must be >= 0");
  if (M.rows() != M.cols()) throw std::invalid_argument("psd_power: non-square input");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("psd_power: input not symmetric within tolerance");
  }
  if (alpha == 0.0) return Matrix::Identity(M.rows(), M.cols());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(M);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("psd_power: eigendecomposition failed");
  }
  Vector lam = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    if (lam[i] < -1e-10 * scale) {
      throw std::invalid_argument("psd_power: indefinite input, eigenvalue " +
                                  std::to_string(lam[i]));
    }
    lam[i] = lam[i] < 0.0 ? 0.0 : std::pow(lam[i], alpha);
  }
  Matrix R = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (R + R.transpose());
}

double nuclear_norm(const Matrix& M) {
  return singular_values(M).sum();
}

double schatten_quasi_norm_p(const Matrix& M, double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("schatten_quasi_norm_p: p must be in (0, 1]");
  }
  const Vector s = singular_values(M);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) acc += std::pow(s[i], p);
  return acc;
}

double effective_rank(const Matrix& M) {
  const Vector s = singular_values(M);
  const double total = s.sum();
  if (total <= 0.0) throw std::invalid_argument("effective_rank: zero matrix");
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double p = s[i] / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double reconstruction_error(const Matrix& W, const Matrix& Wstar) {
  if (W.rows() != Wstar.rows() || W.cols() != Wstar.cols()) {
    throw std::invalid_argument("reconstruction_error: shape mismatch");
  }
  const double denom = Wstar.norm();
  if (denom == 0.0) throw std::invalid_argument("reconstruction_error: Wstar is zero");
  return (W - Wstar).norm() / denom;
}

int numerical_rank(const Matrix& M, double rel_tol) {
  const Vector s = singular_values(M);
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double cut = rel_tol * s[0];
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cut) ++r;
  }
  return r;
}

Vector SingularTracker::track(const SvdTriple& next) {
  const Eigen::Index k = next.S.size();
  if (!initialized_) {
    prev_U_ = next.U;
    prev_V_ = next.V;
    initialized_ = true;
    return next.S;
  }

  // Greedy assignment by |<u_prev, u_new>|, largest overlap first.
  Matrix overlap = (prev_U_.transpose() * next.U).cwiseAbs();
  std::vector<int> assign(k, -1);
  std::vector<bool> used_prev(k, false), used_next(k, false);
  for (Eigen::Index pick = 0; pick < k; ++pick) {
    int best_p = -1, best_n = -1;
    double best = -1.0;
    for (Eigen::Index p = 0; p < k; ++p) {
      if (used_prev[p]) continue;
      for (Eigen::Index n = 0; n < k; ++n) {
        if (used_next[n]) continue;
        if (overlap(p, n) > best) {
          best = overlap(p, n);
          best_p = static_cast<int>(p);
          best_n = static_cast<int>(n);
        }
      }
    }
    assign[best_p] = best_n;
    used_prev[best_p] = used_next[best_n] = true;
  }

  Vector signed_s(k);
  Matrix new_U(next.U.rows(), k), new_V(next.V.rows(), k);
  for (Eigen::Index p = 0; p < k; ++p) {
    const int n = assign[p];
    const double udot = prev_U_.col(p).dot(next.U.col(n));
    const double vdot = prev_V_.col(p).dot(next.V.col(n));
    // Orient both vectors to match the previous curve; a joint flip of u and
    // v leaves sigma positive, a single flip makes it negative.
    const double su = udot < 0.0 ? -1.0 : 1.0;
    const double sv = vdot < 0.0 ? -1.0 : 1.0;
    new_U.col(p) = su * next.U.col(n);
    new_V.col(p) = sv * next.V.col(n);
    signed_s[p] = su * sv * next.S[n];
  }
  prev_U_ = new_U;
  prev_V_ = new_V;
  return signed_s;
}

}  // namespace dmf
