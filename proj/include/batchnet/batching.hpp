#pragma once

#include "batchnet/backprop.hpp"
#include "batchnet/loss.hpp"
#include "batchnet/matrix.hpp"
#include "batchnet/network.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace batchnet {

struct TrainConfig {
  explicit TrainConfig(Topology topo) : topology(std::move(topo)) {}

  double eta = 0.5;
  std::int64_t epochs = 0;
  Eigen::Index batch_size = 4;
  int shards = 1;
  std::uint64_t seed = 1;
  Topology topology;
};

inline void validate(const TrainConfig& config) {
  if (!(config.eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (config.shards < 1) throw std::invalid_argument("shards must be >= 1");
  if (config.shards > config.batch_size) {
    throw std::invalid_argument("shards (" + std::to_string(config.shards) +
                                ") must not exceed batch size (" +
                                std::to_string(config.batch_size) + ")");
  }
}

/// A contiguous row slice of a batch, trained in isolation. weight is
/// the slice's share of the batch, rows/B; the weights of a partition
/// sum to 1.
struct MicroBatch {
  Matrix inputs;
  Matrix targets;
  double weight = 1.0;
};

/// Contiguous row partition into k micro-batches with sizes differing by
/// at most one (larger slices first). Concatenating the slices in order
/// reproduces the originals.
inline std::vector<MicroBatch> split(const MatrixRef& inputs, const MatrixRef& targets, int k) {
  if (inputs.rows() != targets.rows()) {
    throw ShapeError("split", inputs.rows(), inputs.cols(), targets.rows(), targets.cols());
  }
  const Eigen::Index total = inputs.rows();
  if (k < 1 || static_cast<Eigen::Index>(k) > total) {
    throw std::invalid_argument("split: k = " + std::to_string(k) + " out of range [1, " +
                                std::to_string(total) + "]");
  }
  const Eigen::Index base = total / k;
  const Eigen::Index remainder = total % k;
  std::vector<MicroBatch> shards;
  shards.reserve(static_cast<std::size_t>(k));
  Eigen::Index row = 0;
  for (int i = 0; i < k; ++i) {
    const Eigen::Index rows = base + (i < remainder ? 1 : 0);
    shards.push_back(MicroBatch{inputs.middleRows(row, rows), targets.middleRows(row, rows),
                                static_cast<double>(rows) / static_cast<double>(total)});
    row += rows;
  }
  return shards;
}

/// Weighted sum of per-shard gradients, folded in list order so the
/// reduction is deterministic regardless of how the shards were computed.
inline GradientSet combine(const std::vector<GradientSet>& grad_sets,
                           const std::vector<double>& weights) {
  if (grad_sets.empty() || grad_sets.size() != weights.size()) {
    throw std::invalid_argument("combine: need matching, nonempty gradient and weight lists");
  }
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  if (std::abs(weight_sum - 1.0) > 1e-12) {
    throw std::invalid_argument("combine: weights sum to " + std::to_string(weight_sum) +
                                ", expected 1");
  }
  GradientSet combined;
  combined.grads.reserve(grad_sets[0].grads.size());
  for (const Matrix& g : grad_sets[0].grads) combined.grads.push_back(weights[0] * g);
  for (std::size_t i = 1; i < grad_sets.size(); ++i) {
    if (grad_sets[i].grads.size() != combined.grads.size()) {
      throw std::invalid_argument("combine: gradient sets have different layer counts");
    }
    for (std::size_t l = 0; l < combined.grads.size(); ++l) {
      detail::require_same_shape("combine", combined.grads[l], grad_sets[i].grads[l]);
      combined.grads[l] += weights[i] * grad_sets[i].grads[l];
    }
  }
  return combined;
}

struct TrainResult {
  Network network;
  std::vector<ErrorReport> epoch_errors;
  std::vector<double> epoch_wall_ms;
};

namespace detail {
/// Gradient of one micro-batch; reads the shared network, writes nothing.
inline GradientSet shard_gradient(const Network& net, const MicroBatch& shard) {
  const ForwardTrace trace = forward(net, shard.inputs);
  return backward(net, trace, shard.targets);
}
}  // namespace detail

/// Epoch-level training driver. Each epoch traverses the dataset in
/// order in full batches (final short batch allowed); every batch is
/// split into micro-batches whose gradients are computed independently
/// (in parallel when shards > 1), combined by sample-weighted mean, and
/// applied as a single update. The epoch error is reported on the full
/// dataset. Fully deterministic for a fixed config.
inline TrainResult train(const TrainConfig& config, const MatrixRef& inputs,
                         const MatrixRef& targets) {
  validate(config);
  if (inputs.rows() < 1) throw std::invalid_argument("train: dataset is empty");
  if (inputs.rows() != targets.rows()) {
    throw ShapeError("train", inputs.rows(), inputs.cols(), targets.rows(), targets.cols());
  }
  if (inputs.cols() != config.topology.feature_count()) {
    throw ShapeError("train", "dataset has " + std::to_string(inputs.cols()) +
                                  " features, topology expects " +
                                  std::to_string(config.topology.feature_count()));
  }
  if (targets.cols() != config.topology.output_count()) {
    throw ShapeError("train", "dataset has " + std::to_string(targets.cols()) +
                                  " targets, topology expects " +
                                  std::to_string(config.topology.output_count()));
  }

  TrainResult result{init_weights(config.topology, config.seed), {}, {}};
  result.epoch_errors.reserve(static_cast<std::size_t>(config.epochs));
  result.epoch_wall_ms.reserve(static_cast<std::size_t>(config.epochs));
  const Eigen::Index total_rows = inputs.rows();

  for (std::int64_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    for (Eigen::Index start = 0; start < total_rows; start += config.batch_size) {
      const Eigen::Index rows = std::min<Eigen::Index>(config.batch_size, total_rows - start);
      const int k = static_cast<int>(std::min<Eigen::Index>(config.shards, rows));
      const std::vector<MicroBatch> shards =
          split(inputs.middleRows(start, rows), targets.middleRows(start, rows), k);

      std::vector<GradientSet> grad_sets(shards.size());
      if (shards.size() == 1) {
        grad_sets[0] = detail::shard_gradient(result.network, shards[0]);
      } else {
        std::vector<std::jthread> workers;
        workers.reserve(shards.size());
        for (std::size_t i = 0; i < shards.size(); ++i) {
          workers.emplace_back([&net = result.network, &shard = shards[i], &slot = grad_sets[i]] {
            slot = detail::shard_gradient(net, shard);
          });
        }
      }

      std::vector<double> weights;
      weights.reserve(shards.size());
      for (const MicroBatch& shard : shards) weights.push_back(shard.weight);
      result.network = apply_update(result.network, combine(grad_sets, weights), config.eta);
    }
    result.epoch_errors.push_back(sse(forward(result.network, inputs).output(), targets));
    const std::chrono::duration<double, std::milli> elapsed =
        std::chrono::steady_clock::now() - epoch_start;
    result.epoch_wall_ms.push_back(elapsed.count());
  }
  return result;
}

}  // namespace batchnet
