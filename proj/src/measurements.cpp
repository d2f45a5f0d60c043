#include "dmf/measurements.hpp"

#include "dmf/rng.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace dmf {

MeasurementOperator MeasurementOperator::completion(
    int d, int dp, std::vector<std::pair<int, int>> entries) {
  std::set<std::pair<int, int>> seen;
  for (const auto& [i, j] : entries) {
    if (i < 0 || i >= d || j < 0 || j >= dp) {
      throw std::invalid_argument("completion: entry index out of range");
    }
    if (!seen.insert({i, j}).second) {
      throw std::invalid_argument("completion: repeated entry");
    }
  }
  MeasurementOperator op;
  op.kind_ = MeasurementKind::CompletionMask;
  op.d_ = d;
  op.dp_ = dp;
  op.m_ = static_cast<int>(entries.size());
  op.mask_ = std::move(entries);
  return op;
}

MeasurementOperator MeasurementOperator::gaussian(int d, int dp,
                                                  std::vector<Matrix> mats) {
  for (const auto& A : mats) {
    if (A.rows() != d || A.cols() != dp) {
      throw std::invalid_argument("gaussian: measurement shape mismatch");
    }
  }
  MeasurementOperator op;
  op.kind_ = MeasurementKind::GaussianSensing;
  op.d_ = d;
  op.dp_ = dp;
  op.m_ = static_cast<int>(mats.size());
  op.dense_ = std::move(mats);
  return op;
}

MeasurementOperator MeasurementOperator::diagonal(int d, std::vector<Vector> diags) {
  for (const auto& v : diags) {
    if (v.size() != d) throw std::invalid_argument("diagonal: length mismatch");
  }
  MeasurementOperator op;
  op.kind_ = MeasurementKind::DiagonalFamily;
  op.d_ = d;
  op.dp_ = d;
  op.m_ = static_cast<int>(diags.size());
  op.diag_ = std::move(diags);
  return op;
}

Vector MeasurementOperator::apply(const Matrix& W) const {
  if (W.rows() != d_ || W.cols() != dp_) {
    throw std::invalid_argument("apply: shape mismatch");
  }
  Vector out(m_);
  switch (kind_) {
    case MeasurementKind::CompletionMask:
      for (int i = 0; i < m_; ++i) out[i] = W(mask_[i].first, mask_[i].second);
      break;
    case MeasurementKind::GaussianSensing:
      for (int i = 0; i < m_; ++i) out[i] = dense_[i].cwiseProduct(W).sum();
      break;
    case MeasurementKind::DiagonalFamily:
      for (int i = 0; i < m_; ++i) out[i] = diag_[i].dot(W.diagonal());
      break;
  }
  return out;
}

Matrix MeasurementOperator::adjoint(const Vector& r) const {
  if (r.size() != m_) throw std::invalid_argument("adjoint: length mismatch");
  Matrix out = Matrix::Zero(d_, dp_);
  switch (kind_) {
    case MeasurementKind::CompletionMask:
      for (int i = 0; i < m_; ++i) out(mask_[i].first, mask_[i].second) += r[i];
      break;
    case MeasurementKind::GaussianSensing:
      for (int i = 0; i < m_; ++i) out += r[i] * dense_[i];
      break;
    case MeasurementKind::DiagonalFamily:
      for (int i = 0; i < m_; ++i) out.diagonal() += r[i] * diag_[i];
      break;
  }
  return out;
}

Matrix MeasurementOperator::matrix(int i) const {
  Vector e = Vector::Zero(m_);
  e[i] = 1.0;
  return adjoint(e);
}

std::pair<int, int> MeasurementOperator::mask_entry(int i) const {
  if (kind_ != MeasurementKind::CompletionMask) {
    throw std::logic_error("mask_entry: not a completion mask");
  }
  return mask_.at(static_cast<std::size_t>(i));
}

Matrix MeasurementOperator::gram() const {
  Matrix G(m_, m_);
  switch (kind_) {
    case MeasurementKind::CompletionMask:
      G = Matrix::Identity(m_, m_);  // distinct single-entry indicators
      break;
    case MeasurementKind::GaussianSensing:
      for (int i = 0; i < m_; ++i) {
        for (int j = i; j < m_; ++j) {
          G(i, j) = G(j, i) = dense_[i].cwiseProduct(dense_[j]).sum();
        }
      }
      break;
    case MeasurementKind::DiagonalFamily:
      for (int i = 0; i < m_; ++i) {
        for (int j = i; j < m_; ++j) {
          G(i, j) = G(j, i) = diag_[i].dot(diag_[j]);
        }
      }
      break;
  }
  return G;
}

LabeledTask make_task(MeasurementOperator op, const Matrix& Wstar) {
  require_finite(Wstar, "make_task");
  Vector y = op.apply(Wstar);
  return LabeledTask{std::move(op), std::move(y), Wstar};
}

double loss(const LabeledTask& task, const Matrix& W) {
  return 0.5 * (task.op.apply(W) - task.y).squaredNorm();
}

Matrix loss_grad(const LabeledTask& task, const Matrix& W) {
  return task.op.adjoint(task.op.apply(W) - task.y);
}

MeasurementOperator make_completion(int d, int dp, int m, std::uint64_t seed) {
  const long total = static_cast<long>(d) * dp;
  if (m > total) throw std::invalid_argument("make_completion: m > d * d'");
  // Partial Fisher-Yates over the flattened index set.
  std::vector<long> idx(total);
  std::iota(idx.begin(), idx.end(), 0L);
  CounterRng rng(seed);
  std::vector<std::pair<int, int>> entries;
  entries.reserve(m);
  for (int k = 0; k < m; ++k) {
    const long j = k + static_cast<long>(rng.below(static_cast<std::uint64_t>(total - k)));
    std::swap(idx[k], idx[j]);
    entries.emplace_back(static_cast<int>(idx[k] / dp), static_cast<int>(idx[k] % dp));
  }
  return MeasurementOperator::completion(d, dp, std::move(entries));
}

MeasurementOperator make_gaussian_sensing(int d, int dp, int m, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Matrix> mats;
  mats.reserve(m);
  for (int k = 0; k < m; ++k) {
    Matrix A(d, dp);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < dp; ++j) A(i, j) = rng.normal();
    }
    mats.push_back(std::move(A));
  }
  return MeasurementOperator::gaussian(d, dp, std::move(mats));
}

LabeledTask make_prop1_instance(int d) {
  if (d < 3) throw std::invalid_argument("make_prop1_instance: d must be >= 3");
  std::vector<Vector> diags;
  Vector y(d - 1);
  // W_11 = W_22  ->  <diag(1,-1,0,...), W> = 0
  Vector a = Vector::Zero(d);
  a[0] = 1.0;
  a[1] = -1.0;
  diags.push_back(a);
  y[0] = 0.0;
  // W_11 = W_kk + 1  ->  <diag(1,0,..,-1@k,..), W> = 1
  for (int k = 2; k < d; ++k) {
    Vector b = Vector::Zero(d);
    b[0] = 1.0;
    b[k] = -1.0;
    diags.push_back(b);
    y[k - 1] = 1.0;
  }
  return LabeledTask{MeasurementOperator::diagonal(d, std::move(diags)), y,
                     std::nullopt};
}

}  // namespace dmf
