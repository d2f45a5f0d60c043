#pragma once

#include "dmf/linalg.hpp"
#include "dmf/measurements.hpp"

#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dmf {

/// Raised when the singular vector evolution equations are evaluated at a
/// (near-)degenerate spectrum; such instants are isolated and may be skipped.
struct DegenerateSpectrumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// State of the product-matrix flow at time t, with cached SVD and the
/// accumulated residual integral s(t) = int_0^t (A(W) - y) dt'.
struct FlowState {
  double t = 0.0;
  Matrix W;
  SvdTriple svd;
  Vector s;
  int depth = 1;
};

struct AlignmentDiagnostic {
  double on_diag_mean = 0.0, on_diag_std = 0.0;
  double off_diag_mean = 0.0, off_diag_std = 0.0;
};

/// End-to-end dynamics of the product matrix under balanced gradient flow:
///   Wdot = -sum_{j=1..N} (W W^T)^{(j-1)/N} grad (W^T W)^{(N-j)/N}.
Matrix product_flow_rhs(const Matrix& W, const Matrix& grad, int N);

enum class FlowScheme { Euler, RK4 };

/// Numerically integrates product_flow_rhs over [0, T], recording states at
/// the requested times (which must be sorted, in [0, T]). A step that changes
/// ||W||_F by more than 10% is retried at half size; underflow below 1e-12
/// is an error. The residual integral s(t) is accumulated by trapezoid rule
/// at accepted steps.
std::vector<FlowState> integrate_product_flow(const Matrix& W0,
                                              const LabeledTask& task, int N,
                                              double dt, double T,
                                              FlowScheme scheme,
                                              std::vector<double> record_times);

/// sigma_r' = -N (sigma_r^2)^{1-1/N} <grad, u_r v_r^T>.
double singular_value_rhs(double sigma_r, const Vector& u_r, const Vector& v_r,
                          const Matrix& grad, int N);

/// Time derivatives of U and V. Requires singular values pairwise distinct
/// and nonzero beyond gap tolerance 1e-8 (throws DegenerateSpectrumError
/// otherwise).
std::pair<Matrix, Matrix> singular_vector_rhs(const SvdTriple& svd,
                                              const Matrix& grad, int N);

/// Statistics of |entries| of U^T grad V, split on/off the diagonal.
AlignmentDiagnostic alignment_diagnostic(const SvdTriple& svd, const Matrix& grad);

/// Closed-form diagonal product matrix for an N >= 3 flow over a diagonal
/// commuting family, given the accumulated residual integral s(t):
///   W(t) = alpha^N [I + (N-2) alpha^(N-2) Adj(s)]^(-N/(N-2)).
/// Throws if the bracket loses positive definiteness.
Matrix diagonal_closed_form(double alpha, int N, const LabeledTask& task,
                            const Vector& s);

struct ScalarFlowResult {
  std::vector<double> t;
  std::vector<double> s;
  bool diverged = false;
  double divergence_time = 0.0;
};

/// Integrates s' = (s^2)^alpha g(t) on [0, T] via the closed forms
/// (alpha = 1/2 exponential, alpha > 1/2 power), sampling g on a grid of
/// n_steps trapezoid panels. Truncates with a divergence flag if the power
/// form blows up in finite time.
ScalarFlowResult sign_preserving_scalar_flow(double s0, double alpha,
                                             const std::function<double(double)>& g,
                                             double T, int n_steps = 1000);

/// The paired singular value relation for a single measurement once singular
/// vectors are stationary: sigma_{r1} as a function of sigma_{r2}.
/// N = 1: alpha * sigma + c;  N = 2: sigma^alpha * c;
/// N >= 3: (alpha * sigma^(-(N-2)/N) + c)^(-N/(N-2)).
double illustrative_pair_curve(double sigma_r2, double alpha_ratio, int N,
                               double c);

}  // namespace dmf
