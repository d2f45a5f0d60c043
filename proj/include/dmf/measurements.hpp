#pragma once

#include "dmf/linalg.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace dmf {

enum class MeasurementKind { CompletionMask, GaussianSensing, DiagonalFamily };

/// A family {A_i}_{i=1..m} of linear measurements on d x d' matrices.
/// Completion masks are stored as index lists, Gaussian families densely,
/// diagonal (commuting) families as diagonal vectors.
class MeasurementOperator {
 public:
  static MeasurementOperator completion(int d, int dp,
                                        std::vector<std::pair<int, int>> entries);
  static MeasurementOperator gaussian(int d, int dp, std::vector<Matrix> mats);
  static MeasurementOperator diagonal(int d, std::vector<Vector> diags);

  MeasurementKind kind() const { return kind_; }
  int rows() const { return d_; }
  int cols() const { return dp_; }
  int count() const { return m_; }

  /// (<A_1, W>, ..., <A_m, W>).
  Vector apply(const Matrix& W) const;

  /// sum_i r_i A_i.
  Matrix adjoint(const Vector& r) const;

  /// A_i as a dense matrix.
  Matrix matrix(int i) const;

  /// Entry index of the i'th mask (CompletionMask only).
  std::pair<int, int> mask_entry(int i) const;

  /// Gram matrix of the family, G_ij = <A_i, A_j>.
  Matrix gram() const;

 private:
  MeasurementOperator() = default;

  MeasurementKind kind_ = MeasurementKind::CompletionMask;
  int d_ = 0, dp_ = 0, m_ = 0;
  std::vector<std::pair<int, int>> mask_;
  std::vector<Matrix> dense_;
  std::vector<Vector> diag_;
};

/// Measurements plus labels; Wstar, when known, generated the labels.
struct LabeledTask {
  MeasurementOperator op;
  Vector y;
  std::optional<Matrix> Wstar;
};

LabeledTask make_task(MeasurementOperator op, const Matrix& Wstar);

double loss(const LabeledTask& task, const Matrix& W);
Matrix loss_grad(const LabeledTask& task, const Matrix& W);

/// m distinct entry positions chosen uniformly without replacement.
MeasurementOperator make_completion(int d, int dp, int m, std::uint64_t seed);

/// m measurement matrices with i.i.d. standard normal entries.
MeasurementOperator make_gaussian_sensing(int d, int dp, int m, std::uint64_t seed);

/// The d-1 diagonal constraints W_11 = W_22 and W_11 = W_kk + 1 (k = 3..d),
/// labels (0, 1, ..., 1). The family is linearly independent and commuting;
/// no ground truth is attached (the system is underdetermined).
LabeledTask make_prop1_instance(int d);

}  // namespace dmf
