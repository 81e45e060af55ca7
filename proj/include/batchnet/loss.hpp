#pragma once

#include "batchnet/matrix.hpp"

#include <Eigen/Dense>

namespace batchnet {

/// Batch sum-of-squares error, all views of it at once:
///   per_element    (t - psi)^2 / (2b), shape (b, outputs)
///   per_row_total  error of each batch item (row sums)
///   per_output_mean column means, the per-output average over the batch
///   total          mean of per_row_total
struct ErrorReport {
  Matrix per_element;
  Eigen::VectorXd per_row_total;
  Eigen::VectorXd per_output_mean;
  double total = 0.0;
};

/// The 1/(2n) convention uses n = batch size, so sample-weighted
/// combination of micro-batch gradients reproduces the whole-batch
/// gradient exactly.
inline ErrorReport sse(const MatrixRef& psi, const MatrixRef& targets) {
  detail::require_same_shape("sse", psi, targets);
  const double b = static_cast<double>(psi.rows());
  ErrorReport report;
  report.per_element = (targets - psi).array().square() / (2.0 * b);
  // Reductions in fixed index order: Eigen's vectorized redux may
  // reassociate, and byte-stable results matter here.
  report.per_row_total = Eigen::VectorXd::Zero(psi.rows());
  report.per_output_mean = Eigen::VectorXd::Zero(psi.cols());
  for (Eigen::Index r = 0; r < psi.rows(); ++r) {
    for (Eigen::Index c = 0; c < psi.cols(); ++c) {
      report.per_row_total(r) += report.per_element(r, c);
    }
  }
  double row_sum = 0.0;
  for (Eigen::Index r = 0; r < psi.rows(); ++r) row_sum += report.per_row_total(r);
  report.total = row_sum / b;
  for (Eigen::Index c = 0; c < psi.cols(); ++c) {
    for (Eigen::Index r = 0; r < psi.rows(); ++r) {
      report.per_output_mean(c) += report.per_element(r, c);
    }
    report.per_output_mean(c) /= b;
  }
  return report;
}

/// Error summed over batch rows instead of averaged; the quantity whose
/// derivative with respect to psi is (psi - t)/b, i.e. what backprop
/// descends and what the finite-difference oracle differentiates.
inline double batch_error_sum(const ErrorReport& report) {
  double sum = 0.0;
  for (Eigen::Index r = 0; r < report.per_row_total.size(); ++r) sum += report.per_row_total(r);
  return sum;
}

}  // namespace batchnet
