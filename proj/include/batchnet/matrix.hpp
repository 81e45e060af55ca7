#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <string>

namespace batchnet {

/// Dense 2-D carrier for every tensor in the library: inputs, weights,
/// activations, deltas and gradients. Row-major so batch rows are
/// contiguous, (batch, feature) layout.
template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Training math is 64-bit throughout; gradient-check tolerances of 1e-5
/// are not reliable in 32-bit.
using Matrix = DenseMatrix<double>;

using MatrixRef = Eigen::Ref<const Matrix>;

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

/// Recoverable dimension-mismatch error naming both operand shapes.
class ShapeError : public std::runtime_error {
public:
  ShapeError(const std::string& op, Eigen::Index lhs_rows, Eigen::Index lhs_cols,
             Eigen::Index rhs_rows, Eigen::Index rhs_cols)
      : std::runtime_error(op + ": incompatible shapes " + shape_str(lhs_rows, lhs_cols) +
                           " and " + shape_str(rhs_rows, rhs_cols)) {}

  ShapeError(const std::string& op, const std::string& detail) : std::runtime_error(op + ": " + detail) {}
};

namespace detail {
inline void require_same_shape(const char* op, const MatrixRef& a, const MatrixRef& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(op, a.rows(), a.cols(), b.rows(), b.cols());
  }
}
}  // namespace detail

/// Inner (dot) product of two matrices.
///
/// Fixed-order scalar accumulation: row i of the result is a function of
/// row i of `a` alone, and the k-summation order never depends on the
/// batch shape. Batched and single-row products therefore agree bitwise
/// row by row.
inline Matrix matmul(const MatrixRef& a, const MatrixRef& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul", a.rows(), a.cols(), b.rows(), b.cols());
  }
  Matrix out(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        acc += a(i, k) * b(k, j);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

/// Elementwise (Hadamard) product.
inline Matrix hadamard(const MatrixRef& a, const MatrixRef& b) {
  detail::require_same_shape("hadamard", a, b);
  return a.cwiseProduct(b);
}

inline Matrix transpose(const MatrixRef& a) { return a.transpose(); }

/// Prepends a constant-1 column: [x1 x2] -> [1 x1 x2]. The bias weights
/// of the following layer live in row 0, so no separate bias path exists.
inline Matrix augment_bias(const MatrixRef& a) {
  Matrix out(a.rows(), a.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(a.cols()) = a;
  return out;
}

/// Drops row 0 (the bias weights). The constant bias input is not a
/// function of the previous layer's output, so it carries no upstream
/// credit during backpropagation.
inline Matrix strip_bias_row(const MatrixRef& a) {
  if (a.rows() < 2) {
    throw ShapeError("strip_bias_row", "need at least 2 rows, got " + shape_str(a.rows(), a.cols()));
  }
  return a.bottomRows(a.rows() - 1);
}

inline Matrix scale(const MatrixRef& a, double c) { return a * c; }

inline Matrix add(const MatrixRef& a, const MatrixRef& b) {
  detail::require_same_shape("add", a, b);
  return a + b;
}

inline Matrix sub(const MatrixRef& a, const MatrixRef& b) {
  detail::require_same_shape("sub", a, b);
  return a - b;
}

}  // namespace batchnet
