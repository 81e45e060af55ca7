#pragma once

#include "batchnet/loss.hpp"
#include "batchnet/matrix.hpp"
#include "batchnet/network.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace batchnet {

/// Per-layer dE/dW matrices, shape-congruent with the owning network's
/// weights.
struct GradientSet {
  std::vector<Matrix> grads;
};

/// dpsi/dNet for the logistic activation: psi(1 - psi), in (0, 0.25].
inline Matrix activation_derivative(const MatrixRef& psi) {
  return psi.array() * (1.0 - psi.array());
}

/// Output-layer delta: ((psi - t)/b) ⊙ psi(1−psi).
/// The /b keeps the batch averaging here so layer_gradient stays a pure
/// matrix product.
inline Matrix output_delta(const MatrixRef& psi, const MatrixRef& targets) {
  detail::require_same_shape("output_delta", psi, targets);
  const double b = static_cast<double>(psi.rows());
  Matrix dE_dpsi = (psi - targets) / b;
  return hadamard(dE_dpsi, activation_derivative(psi));
}

/// Propagates the downstream delta one layer back:
/// (delta_next · strip_bias(W_next)^T) ⊙ psi_l(1−psi_l).
inline Matrix hidden_delta(const MatrixRef& delta_next, const MatrixRef& weights_next,
                           const MatrixRef& psi_l) {
  if (weights_next.rows() != psi_l.cols() + 1) {
    throw ShapeError("hidden_delta", weights_next.rows(), weights_next.cols(), psi_l.rows(),
                     psi_l.cols());
  }
  Matrix dE_dpsi = matmul(delta_next, transpose(strip_bias_row(weights_next)));
  return hadamard(dE_dpsi, activation_derivative(psi_l));
}

/// dE/dW for one layer: phi^T · delta. Row 0 of the result is the bias
/// gradient, the column sums of delta.
inline Matrix layer_gradient(const MatrixRef& phi, const MatrixRef& delta) {
  if (phi.rows() != delta.rows()) {
    throw ShapeError("layer_gradient", phi.rows(), phi.cols(), delta.rows(), delta.cols());
  }
  return matmul(transpose(phi), delta);
}

/// Full backward pass over a forward trace. Deltas start at the output
/// layer and are propagated to layer 0, whose phi is the bias-augmented
/// raw input.
inline GradientSet backward(const Network& net, const ForwardTrace& trace,
                            const MatrixRef& targets) {
  const std::size_t layers = net.weights.size();
  if (trace.phis.size() != layers || trace.psis.size() != layers) {
    throw std::invalid_argument("backward: trace does not match network depth");
  }
  GradientSet set;
  set.grads.resize(layers);
  Matrix delta = output_delta(trace.output(), targets);
  set.grads[layers - 1] = layer_gradient(trace.phis[layers - 1], delta);
  for (std::size_t l = layers - 1; l-- > 0;) {
    delta = hidden_delta(delta, net.weights[l + 1], trace.psis[l]);
    set.grads[l] = layer_gradient(trace.phis[l], delta);
  }
  return set;
}

/// One gradient-descent step, W - eta * dE/dW per layer. Returns the
/// updated network; the input network is never mutated, which keeps
/// concurrent shard evaluation read-only by construction.
inline Network apply_update(const Network& net, const GradientSet& grads, double eta) {
  if (!(eta > 0.0)) {
    throw std::invalid_argument("apply_update: eta must be > 0, got " + std::to_string(eta));
  }
  if (grads.grads.size() != net.weights.size()) {
    throw std::invalid_argument("apply_update: gradient set has " +
                                std::to_string(grads.grads.size()) + " layers, network has " +
                                std::to_string(net.weights.size()));
  }
  Network updated = net;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    detail::require_same_shape("apply_update", net.weights[l], grads.grads[l]);
    updated.weights[l] = net.weights[l] - eta * grads.grads[l];
  }
  return updated;
}

}  // namespace batchnet
