#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>

#include "refatom/core/dense.hpp"

namespace refatom {

/// y = x W + b with b broadcast over rows.
template <class DX, class DW, class DB>
Matrix<typename DX::Scalar> linear(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DW>& w,
                                   const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DX::Scalar;
  if (x.cols() != w.rows()) throw_shape_mismatch("linear(x, W)", x, w);
  if (b.size() != w.cols()) throw_shape_mismatch("linear(W, b)", w, b);
  Matrix<Scalar> y = x * w;
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    for (Eigen::Index c = 0; c < y.cols(); ++c) y(r, c) += b(c);
  }
  return y;
}

/// Bias-free projection; identical arithmetic to linear() with b = 0 skipped.
template <class DX, class DW>
Matrix<typename DX::Scalar> project(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DW>& w) {
  if (x.cols() != w.rows()) throw_shape_mismatch("project(x, W)", x, w);
  return x * w;
}

/// Numerically stable softmax of a vector (max subtracted before exp).
template <class Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw DomainError("softmax: empty input");
  const Scalar m = v.maxCoeff();
  Vector<Scalar> e(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) e(i) = std::exp(v(i) - m);
  return e / e.sum();
}

/// Row-wise softmax; each row is treated as an independent logit vector.
template <class Derived>
Matrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.cols() == 0) throw DomainError("softmax_rows: empty rows");
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const Scalar m = logits.row(r).maxCoeff();
    Scalar sum = 0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      out(r, c) = std::exp(logits(r, c) - m);
      sum += out(r, c);
    }
    out.row(r) /= sum;
  }
  return out;
}

template <std::floating_point Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <class Derived>
Matrix<typename Derived::Scalar> sigmoid(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return sigmoid(v); });
}

template <class Derived>
Matrix<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return x.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : Scalar(0); });
}

/// Column-wise mean: averages the rows of `x` into one row.
template <class Derived>
RowVector<typename Derived::Scalar> mean_rows(const Eigen::MatrixBase<Derived>& x) {
  if (x.rows() == 0) throw DomainError("mean_rows: no rows");
  return x.colwise().sum() / static_cast<typename Derived::Scalar>(x.rows());
}

template <class DA, class DB>
Matrix<typename DA::Scalar> concat_rows(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols()) throw_shape_mismatch("concat_rows", a, b);
  const Eigen::Index cols = a.rows() > 0 ? a.cols() : b.cols();
  Matrix<typename DA::Scalar> out(a.rows() + b.rows(), cols);
  if (a.rows() > 0) out.topRows(a.rows()) = a;
  if (b.rows() > 0) out.bottomRows(b.rows()) = b;
  return out;
}

}  // namespace refatom
