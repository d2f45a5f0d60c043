#include "dmf/flow.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dmf {

namespace {

// One eigendecomposition of a PSD Gram matrix, reused for all fractional
// powers appearing in the end-to-end dynamics.
class PsdPowers {
 public:
  explicit PsdPowers(const Matrix& M) : eig_(M) {
    if (eig_.info() != Eigen::Success) {
      throw std::runtime_error("product_flow_rhs: eigendecomposition failed");
    }
    lam_ = eig_.eigenvalues();
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < lam_.size(); ++i) {
      if (lam_[i] < -1e-10 * scale) {
        throw std::invalid_argument("product_flow_rhs: indefinite Gram matrix, eigenvalue " +
                                    std::to_string(lam_[i]));
      }
      lam_[i] = std::max(lam_[i], 0.0);
    }
  }

  Matrix pow(double a) const {
    if (a == 0.0) return Matrix::Identity(lam_.size(), lam_.size());
    Vector p(lam_.size());
    for (Eigen::Index i = 0; i < lam_.size(); ++i) p[i] = std::pow(lam_[i], a);
    return eig_.eigenvectors() * p.asDiagonal() * eig_.eigenvectors().transpose();
  }

 private:
  Eigen::SelfAdjointEigenSolver<Matrix> eig_;
  Vector lam_;
};

}  // namespace

Matrix product_flow_rhs(const Matrix& W, const Matrix& grad, int N) {
  if (N < 1) throw std::invalid_argument("product_flow_rhs: N must be >= 1");
  if (W.rows() != grad.rows() || W.cols() != grad.cols()) {
    throw std::invalid_argument("product_flow_rhs: shape mismatch");
  }
  if (N == 1) return -grad;

  const PsdPowers left(W * W.transpose());
  const PsdPowers right(W.transpose() * W);
  Matrix acc = Matrix::Zero(W.rows(), W.cols());
  for (int j = 1; j <= N; ++j) {
    acc += left.pow(static_cast<double>(j - 1) / N) * grad *
           right.pow(static_cast<double>(N - j) / N);
  }
  return -acc;
}

namespace {

Matrix flow_step(const Matrix& W, const LabeledTask& task, int N, double h,
                 FlowScheme scheme) {
  auto rhs = [&](const Matrix& X) { return product_flow_rhs(X, loss_grad(task, X), N); };
  if (scheme == FlowScheme::Euler) return h * rhs(W);
  const Matrix k1 = rhs(W);
  const Matrix k2 = rhs(W + 0.5 * h * k1);
  const Matrix k3 = rhs(W + 0.5 * h * k2);
  const Matrix k4 = rhs(W + h * k3);
  return (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

std::vector<FlowState> integrate_product_flow(const Matrix& W0,
                                              const LabeledTask& task, int N,
                                              double dt, double T,
                                              FlowScheme scheme,
                                              std::vector<double> record_times) {
  if (dt <= 0.0) throw std::invalid_argument("integrate_product_flow: dt must be > 0");
  if (!std::is_sorted(record_times.begin(), record_times.end())) {
    throw std::invalid_argument("integrate_product_flow: record times must be sorted");
  }
  require_finite(W0, "integrate_product_flow");

  std::vector<FlowState> out;
  Matrix W = W0;
  Vector s = Vector::Zero(task.op.count());
  double t = 0.0;
  std::size_t ri = 0;

  auto emit = [&](double at) {
    out.push_back(FlowState{at, W, svd(W), s, N});
  };
  const double eps = 1e-12 * std::max(1.0, T);
  while (ri < record_times.size() && record_times[ri] <= t + eps) {
    emit(t);
    ++ri;
  }

  while (t < T - eps) {
    double target = std::min(t + dt, T);
    if (ri < record_times.size()) target = std::min(target, record_times[ri]);
    double h = target - t;

    Matrix dW;
    for (;;) {
      dW = flow_step(W, task, N, h, scheme);
      const double ref = W.norm() + 1e-9;
      if (dW.allFinite() && dW.norm() <= 0.1 * ref) break;
      h *= 0.5;
      if (h < 1e-12) {
        throw std::runtime_error(
            "integrate_product_flow: step size underflow at t = " + std::to_string(t) +
            ", |W| = " + std::to_string(W.norm()));
      }
    }

    const Vector r0 = task.op.apply(W) - task.y;
    const Matrix W1 = W + dW;
    const Vector r1 = task.op.apply(W1) - task.y;
    s += 0.5 * h * (r0 + r1);
    W = W1;
    t += h;

    while (ri < record_times.size() && record_times[ri] <= t + eps) {
      emit(record_times[ri]);
      ++ri;
    }
  }
  return out;
}

double singular_value_rhs(double sigma_r, const Vector& u_r, const Vector& v_r,
                          const Matrix& grad, int N) {
  if (N < 1) throw std::invalid_argument("singular_value_rhs: N must be >= 1");
  const double coupling = u_r.dot(grad * v_r);
  const double factor = std::pow(sigma_r * sigma_r, 1.0 - 1.0 / N);
  return -static_cast<double>(N) * factor * coupling;
}

std::pair<Matrix, Matrix> singular_vector_rhs(const SvdTriple& decomp,
                                              const Matrix& grad, int N) {
  if (N < 1) throw std::invalid_argument("singular_vector_rhs: N must be >= 1");
  const Eigen::Index k = decomp.S.size();
  const double gap_tol = 1e-8;

  Vector pow_1N(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    if (std::abs(decomp.S[r]) < gap_tol) {
      throw DegenerateSpectrumError("singular_vector_rhs: singular value near zero");
    }
    pow_1N[r] = std::pow(decomp.S[r] * decomp.S[r], 1.0 / N);
  }
  Matrix F = Matrix::Zero(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index q = 0; q < k; ++q) {
      if (r == q) continue;
      const double gap = pow_1N[q] - pow_1N[r];
      if (std::abs(gap) < gap_tol) {
        throw DegenerateSpectrumError("singular_vector_rhs: spectral gap below tolerance");
      }
      F(r, q) = 1.0 / gap;
    }
  }

  const Matrix A = decomp.U.transpose() * grad * decomp.V;  // k x k
  const Matrix S = decomp.S.asDiagonal();
  Vector perp_pow(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    perp_pow[r] = std::pow(decomp.S[r] * decomp.S[r], 0.5 - 1.0 / N);
  }

  const Matrix Udot =
      -decomp.U * (F.cwiseProduct(A * S + S * A.transpose())) -
      (Matrix::Identity(decomp.U.rows(), decomp.U.rows()) -
       decomp.U * decomp.U.transpose()) *
          grad * decomp.V * perp_pow.asDiagonal();
  const Matrix Vdot =
      -decomp.V * (F.cwiseProduct(S * A + A.transpose() * S)) -
      (Matrix::Identity(decomp.V.rows(), decomp.V.rows()) -
       decomp.V * decomp.V.transpose()) *
          grad.transpose() * decomp.U * perp_pow.asDiagonal();
  return {Udot, Vdot};
}

AlignmentDiagnostic alignment_diagnostic(const SvdTriple& decomp, const Matrix& grad) {
  const Matrix A = (decomp.U.transpose() * grad * decomp.V).cwiseAbs();
  const Eigen::Index k = A.rows();
  AlignmentDiagnostic diag;
  double on_sum = 0.0, on_sq = 0.0, off_sum = 0.0, off_sq = 0.0;
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index q = 0; q < k; ++q) {
      if (r == q) {
        on_sum += A(r, q);
        on_sq += A(r, q) * A(r, q);
      } else {
        off_sum += A(r, q);
        off_sq += A(r, q) * A(r, q);
      }
    }
  }
  const double n_on = static_cast<double>(k);
  const double n_off = static_cast<double>(k * k - k);
  diag.on_diag_mean = on_sum / n_on;
  diag.on_diag_std = std::sqrt(std::max(0.0, on_sq / n_on - diag.on_diag_mean * diag.on_diag_mean));
  if (n_off > 0) {
    diag.off_diag_mean = off_sum / n_off;
    diag.off_diag_std =
        std::sqrt(std::max(0.0, off_sq / n_off - diag.off_diag_mean * diag.off_diag_mean));
  }
  return diag;
}

Matrix diagonal_closed_form(double alpha, int N, const LabeledTask& task,
                            const Vector& s) {
  if (N < 3) throw std::invalid_argument("diagonal_closed_form: N must be >= 3");
  if (alpha <= 0.0) throw std::invalid_argument("diagonal_closed_form: alpha must be > 0");
  if (task.op.kind() != MeasurementKind::DiagonalFamily) {
    throw std::invalid_argument("diagonal_closed_form: requires a diagonal commuting family");
  }
  const Matrix As = task.op.adjoint(s);
  const int d = task.op.rows();
  const double coeff = (N - 2) * std::pow(alpha, N - 2);
  const double outer = std::pow(alpha, N);
  const double expo = -static_cast<double>(N) / (N - 2);
  Matrix W = Matrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    const double bracket = 1.0 + coeff * As(k, k);
    if (bracket <= 0.0) {
      throw std::runtime_error(
          "diagonal_closed_form: bracket lost positive definiteness at index " +
          std::to_string(k));
    }
    W(k, k) = outer * std::pow(bracket, expo);
  }
  return W;
}

ScalarFlowResult sign_preserving_scalar_flow(double s0, double alpha,
                                             const std::function<double(double)>& g,
                                             double T, int n_steps) {
  if (alpha < 0.5) {
    throw std::invalid_argument("sign_preserving_scalar_flow: alpha must be >= 1/2");
  }
  if (T <= 0.0 || n_steps < 1) {
    throw std::invalid_argument("sign_preserving_scalar_flow: bad grid");
  }
  ScalarFlowResult res;
  const double h = T / n_steps;
  double G = 0.0;  // int_0^t g
  double g_prev = g(0.0);
  res.t.push_back(0.0);
  res.s.push_back(s0);
  for (int i = 1; i <= n_steps; ++i) {
    const double t = i * h;
    const double g_here = g(t);
    G += 0.5 * h * (g_prev + g_here);
    g_prev = g_here;

    double value;
    if (s0 == 0.0) {
      value = 0.0;
    } else if (alpha == 0.5) {
      value = s0 > 0.0 ? s0 * std::exp(G) : s0 * std::exp(-G);
    } else {
      const double q = -2.0 * alpha + 1.0;  // < 0
      if (s0 > 0.0) {
        const double base = std::pow(s0, q) + q * G;
        if (base <= 0.0) {
          res.diverged = true;
          res.divergence_time = t;
          break;
        }
        value = std::pow(base, 1.0 / q);
      } else {
        const double base = std::pow(-s0, q) - q * G;
        if (base <= 0.0) {
          res.diverged = true;
          res.divergence_time = t;
          break;
        }
        value = -std::pow(base, 1.0 / q);
      }
    }
    res.t.push_back(t);
    res.s.push_back(value);
  }
  return res;
}

double illustrative_pair_curve(double sigma_r2, double alpha_ratio, int N, double c) {
  if (N < 1) throw std::invalid_argument("illustrative_pair_curve: N must be >= 1");
  if (N == 1) return alpha_ratio * sigma_r2 + c;
  if (sigma_r2 <= 0.0) {
    throw std::invalid_argument("illustrative_pair_curve: sigma_r2 must be > 0");
  }
  if (N == 2) return std::pow(sigma_r2, alpha_ratio) * c;
  const double base = alpha_ratio * std::pow(sigma_r2, -static_cast<double>(N - 2) / N) + c;
  if (base <= 0.0) {
    throw std::invalid_argument("illustrative_pair_curve: non-positive power base");
  }
  return std::pow(base, -static_cast<double>(N) / (N - 2));
}

}  // namespace dmf
