#pragma once

#include "batchnet/backprop.hpp"
#include "batchnet/loss.hpp"
#include "batchnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace batchnet {

struct GradCheckLocation {
  std::size_t layer = 0;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  GradCheckLocation worst_location;
  std::vector<double> per_layer_max;
  bool passed = false;
  double rtol = 0.0;
};

/// Central finite differences of the batch error over every weight:
/// [E(w+eps) - E(w-eps)] / (2 eps), with E the row-summed sse, the
/// quantity backward differentiates. Central differences keep the
/// truncation error at O(eps^2), which is what makes a 1e-5 rtol
/// reachable in 64-bit arithmetic.
///
/// Works on a private copy; the caller's network is untouched.
inline GradientSet numeric_gradient(const Network& net, const MatrixRef& input,
                                    const MatrixRef& targets, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("numeric_gradient: epsilon must be > 0");
  }
  Network probe = net;
  const auto error_at = [&]() {
    return batch_error_sum(sse(forward(probe, input).output(), targets));
  };
  GradientSet set;
  set.grads.reserve(net.weights.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix grad(net.weights[l].rows(), net.weights[l].cols());
    for (Eigen::Index r = 0; r < grad.rows(); ++r) {
      for (Eigen::Index c = 0; c < grad.cols(); ++c) {
        const double original = probe.weights[l](r, c);
        probe.weights[l](r, c) = original + epsilon;
        const double error_plus = error_at();
        probe.weights[l](r, c) = original - epsilon;
        const double error_minus = error_at();
        probe.weights[l](r, c) = original;
        grad(r, c) = (error_plus - error_minus) / (2.0 * epsilon);
      }
    }
    set.grads.push_back(std::move(grad));
  }
  return set;
}

/// Per-weight relative error |a - n| / max(1e-8, |a| + |n|), reduced to
/// the worst offender.
inline GradCheckReport compare(const GradientSet& analytic, const GradientSet& numeric,
                               double rtol) {
  if (analytic.grads.size() != numeric.grads.size()) {
    throw std::invalid_argument("compare: gradient sets have different layer counts");
  }
  GradCheckReport report;
  report.rtol = rtol;
  report.per_layer_max.reserve(analytic.grads.size());
  for (std::size_t l = 0; l < analytic.grads.size(); ++l) {
    const Matrix& a = analytic.grads[l];
    const Matrix& n = numeric.grads[l];
    detail::require_same_shape("compare", a, n);
    double layer_max = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double denom = std::max(1e-8, std::abs(a(r, c)) + std::abs(n(r, c)));
        const double rel = std::abs(a(r, c) - n(r, c)) / denom;
        if (rel > layer_max) layer_max = rel;
        if (rel > report.max_relative_error) {
          report.max_relative_error = rel;
          report.worst_location = {l, r, c};
        }
      }
    }
    report.per_layer_max.push_back(layer_max);
  }
  report.passed = report.max_relative_error <= rtol;
  return report;
}

}  // namespace batchnet
