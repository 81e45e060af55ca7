#pragma once

#include "batchnet/matrix.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchnet {

/// Layer sizes [n0, n1, ..., nL]: n0 input features, nL outputs.
class Topology {
public:
  explicit Topology(std::vector<Eigen::Index> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) {
      throw std::invalid_argument("topology needs at least an input and an output layer");
    }
    for (Eigen::Index n : sizes_) {
      if (n < 1) throw std::invalid_argument("topology layer sizes must be >= 1");
    }
  }

  const std::vector<Eigen::Index>& layer_sizes() const { return sizes_; }
  Eigen::Index feature_count() const { return sizes_.front(); }
  Eigen::Index output_count() const { return sizes_.back(); }

  /// Number of weight matrices (one per layer transition).
  std::size_t weight_layer_count() const { return sizes_.size() - 1; }

  bool operator==(const Topology& other) const = default;

private:
  std::vector<Eigen::Index> sizes_;
};

/// Per-layer weight matrices of shape (fan_in + 1, fan_out); row 0 holds
/// the bias weights.
struct Network {
  Topology topology;
  std::vector<Matrix> weights;
};

/// Throws unless weight shapes match the topology and chain together.
inline void validate(const Network& net) {
  const auto& sizes = net.topology.layer_sizes();
  if (net.weights.size() != net.topology.weight_layer_count()) {
    throw std::invalid_argument("network has " + std::to_string(net.weights.size()) +
                                " weight layers, topology expects " +
                                std::to_string(net.topology.weight_layer_count()));
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Matrix& w = net.weights[l];
    if (w.rows() != sizes[l] + 1 || w.cols() != sizes[l + 1]) {
      throw ShapeError("network layer " + std::to_string(l),
                       "weights are " + shape_str(w.rows(), w.cols()) + ", topology expects " +
                           shape_str(sizes[l] + 1, sizes[l + 1]));
    }
  }
}

/// Everything backprop needs from a forward pass: phis[l] is the
/// bias-augmented input to layer l, psis[l] the activated output.
/// phis[l+1] == augment_bias(psis[l]).
struct ForwardTrace {
  std::vector<Matrix> phis;
  std::vector<Matrix> psis;

  const Matrix& output() const { return psis.back(); }
};

namespace detail {
/// Stable two-branch logistic, nudged into the open interval so outputs
/// stay strictly inside (0,1) even when exp saturates.
inline double sigmoid_scalar(double x) {
  double s;
  if (x >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  if (s <= 0.0) return std::numeric_limits<double>::min();
  if (s >= 1.0) return 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return s;
}
}  // namespace detail

/// Elementwise logistic activation, strictly in (0,1).
/// Applied entry by entry through the scalar libm path, so a value maps
/// to the same output regardless of the shape of the matrix around it.
inline Matrix sigmoid(const MatrixRef& x) {
  return x.unaryExpr([](double v) { return detail::sigmoid_scalar(v); });
}

/// Deterministic seeded initialization, identical across platforms.
///
/// One mt19937_64 stream seeded once; layers are filled in order, each
/// layer row-major. Each draw maps the top 53 bits to u in [0,1) via
/// (x >> 11) * 2^-53, then w = (2u - 1) / sqrt(fan_in) with
/// fan_in = layer_sizes[l] + 1. The uniform mapping is spelled out here
/// rather than taken from std::uniform_real_distribution, whose output
/// is not pinned down by the standard.
inline Network init_weights(const Topology& topology, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& sizes = topology.layer_sizes();
  std::vector<Matrix> weights;
  weights.reserve(topology.weight_layer_count());
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const Eigen::Index fan_in = sizes[l] + 1;
    const Eigen::Index fan_out = sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index r = 0; r < fan_in; ++r) {
      for (Eigen::Index c = 0; c < fan_out; ++c) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        w(r, c) = (2.0 * u - 1.0) * bound;
      }
    }
    weights.push_back(std::move(w));
  }
  return Network{topology, std::move(weights)};
}

/// Batched forward propagation. Input rows are batch items; the trace
/// retains every phi and psi for backprop.
inline ForwardTrace forward(const Network& net, const MatrixRef& input) {
  if (input.cols() != net.topology.feature_count()) {
    throw ShapeError("forward", "input is " + shape_str(input.rows(), input.cols()) +
                                    ", topology expects " +
                                    std::to_string(net.topology.feature_count()) + " features");
  }
  if (input.rows() < 1) {
    throw ShapeError("forward", "input has no rows");
  }
  ForwardTrace trace;
  trace.phis.reserve(net.weights.size());
  trace.psis.reserve(net.weights.size());
  Matrix phi = augment_bias(input);
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    Matrix psi = sigmoid(matmul(phi, net.weights[l]));
    trace.phis.push_back(std::move(phi));
    if (l + 1 < net.weights.size()) phi = augment_bias(psi);
    trace.psis.push_back(std::move(psi));
  }
  return trace;
}

}  // namespace batchnet
