#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "batchnet/batching.hpp"

#include "oracle_helpers.hpp"

#include <random>
#include <thread>
#include <vector>

using namespace batchnet;

namespace {

TrainConfig xor_config(std::uint64_t seed, int shards) {
  TrainConfig config(Topology({2, 2, 1}));
  config.eta = 0.5;
  config.epochs = 50;
  config.batch_size = 4;
  config.shards = shards;
  config.seed = seed;
  return config;
}

Matrix xor_inputs() {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  return x;
}

Matrix xor_targets() {
  Matrix t(4, 1);
  t << 0, 1, 1, 0;
  return t;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig config = xor_config(1, 1);
  CHECK_NOTHROW(validate(config));

  TrainConfig bad = config;
  bad.eta = 0.0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = config;
  bad.epochs = -1;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = config;
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = config;
  bad.shards = 0;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = config;
  bad.shards = 5;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("split partitions rows contiguously with near-equal sizes") {
  std::mt19937_64 rng(1);
  Matrix inputs = oracle::random_matrix(rng, 5, 3, 0.0, 1.0);
  Matrix targets = oracle::random_matrix(rng, 5, 2, 0.0, 1.0);

  std::vector<MicroBatch> one = split(inputs, targets, 1);
  REQUIRE(one.size() == 1);
  CHECK(oracle::bit_equal(one[0].inputs, inputs));
  CHECK(oracle::bit_equal(one[0].targets, targets));
  CHECK(one[0].weight == 1.0);

  std::vector<MicroBatch> two = split(inputs.topRows(4), targets.topRows(4), 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].inputs.rows() == 2);
  CHECK(two[1].inputs.rows() == 2);
  CHECK(two[0].weight == 0.5);
  CHECK(two[1].weight == 0.5);

  std::vector<MicroBatch> uneven = split(inputs, targets, 2);
  REQUIRE(uneven.size() == 2);
  CHECK(uneven[0].inputs.rows() == 3);
  CHECK(uneven[1].inputs.rows() == 2);
  CHECK(uneven[0].weight == 0.6);
  CHECK(uneven[1].weight == 0.4);

  Matrix glued(5, 3);
  glued.topRows(3) = uneven[0].inputs;
  glued.bottomRows(2) = uneven[1].inputs;
  CHECK(oracle::bit_equal(glued, inputs));

  CHECK_THROWS_AS(split(inputs, targets, 0), std::invalid_argument);
  CHECK_THROWS_AS(split(inputs, targets, 6), std::invalid_argument);
  CHECK_THROWS_AS(split(inputs, targets.topRows(4), 2), ShapeError);
}

TEST_CASE("combine folds gradients by weight in list order") {
  std::mt19937_64 rng(2);
  Network net = init_weights(Topology({2, 3, 1}), 3);
  Matrix inputs = oracle::random_matrix(rng, 4, 2, 0.0, 1.0);
  Matrix targets = oracle::random_matrix(rng, 4, 1, 0.0, 1.0);
  GradientSet grads = backward(net, forward(net, inputs), targets);

  GradientSet identity = combine({grads}, {1.0});
  for (std::size_t l = 0; l < grads.grads.size(); ++l) {
    CHECK(oracle::bit_equal(identity.grads[l], grads.grads[l]));
  }

  GradientSet averaged = combine({grads, grads}, {0.5, 0.5});
  for (std::size_t l = 0; l < grads.grads.size(); ++l) {
    CHECK(oracle::bit_equal(averaged.grads[l], grads.grads[l]));
  }

  CHECK_THROWS_AS(combine({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(combine({grads}, {0.9}), std::invalid_argument);
  CHECK_THROWS_AS(combine({grads, grads}, {0.7, 0.2}), std::invalid_argument);

  GradientSet mismatched;
  mismatched.grads.push_back(Matrix::Zero(3, 3));
  mismatched.grads.push_back(Matrix::Zero(2, 1));
  CHECK_THROWS_AS(combine({grads, mismatched}, {0.5, 0.5}), ShapeError);
}

TEST_CASE("split then combine reproduces the whole-batch gradient") {
  std::mt19937_64 rng(4);
  Network net = init_weights(Topology({3, 4, 2}), 5);
  Matrix inputs = oracle::random_matrix(rng, 5, 3, 0.0, 1.0);
  Matrix targets = oracle::random_matrix(rng, 5, 2, 0.0, 1.0);
  GradientSet whole = backward(net, forward(net, inputs), targets);

  for (int k : {1, 2, 3, 5}) {
    std::vector<MicroBatch> shards = split(inputs, targets, k);
    std::vector<GradientSet> grad_sets;
    std::vector<double> weights;
    for (const MicroBatch& shard : shards) {
      grad_sets.push_back(backward(net, forward(net, shard.inputs), shard.targets));
      weights.push_back(shard.weight);
    }
    GradientSet combined = combine(grad_sets, weights);
    for (std::size_t l = 0; l < whole.grads.size(); ++l) {
      CHECK((combined.grads[l] - whole.grads[l]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("train with zero epochs returns the untouched initialization") {
  TrainConfig config = xor_config(7, 1);
  config.epochs = 0;
  TrainResult result = train(config, xor_inputs(), xor_targets());
  CHECK(result.epoch_errors.empty());
  Network fresh = init_weights(config.topology, config.seed);
  for (std::size_t l = 0; l < fresh.weights.size(); ++l) {
    CHECK(oracle::bit_equal(result.network.weights[l], fresh.weights[l]));
  }
}

TEST_CASE("train validates dataset shape against the topology") {
  TrainConfig config = xor_config(1, 1);
  CHECK_THROWS_AS(train(config, Matrix(0, 2), Matrix(0, 1)), std::invalid_argument);
  CHECK_THROWS_AS(train(config, Matrix::Ones(4, 3), xor_targets()), ShapeError);
  CHECK_THROWS_AS(train(config, xor_inputs(), Matrix::Ones(4, 2)), ShapeError);
  CHECK_THROWS_AS(train(config, xor_inputs(), Matrix::Ones(3, 1)), ShapeError);
}

TEST_CASE("identical configs train to bit-identical networks") {
  TrainConfig config = xor_config(11, 1);
  TrainResult a = train(config, xor_inputs(), xor_targets());
  TrainResult b = train(config, xor_inputs(), xor_targets());
  REQUIRE(a.epoch_errors.size() == b.epoch_errors.size());
  for (std::size_t e = 0; e < a.epoch_errors.size(); ++e) {
    CHECK(a.epoch_errors[e].total == b.epoch_errors[e].total);
  }
  for (std::size_t l = 0; l < a.network.weights.size(); ++l) {
    CHECK(oracle::bit_equal(a.network.weights[l], b.network.weights[l]));
  }
}

TEST_CASE("sharded training is deterministic and close to the serial run") {
  TrainResult serial = train(xor_config(13, 1), xor_inputs(), xor_targets());
  TrainResult sharded_a = train(xor_config(13, 4), xor_inputs(), xor_targets());
  TrainResult sharded_b = train(xor_config(13, 4), xor_inputs(), xor_targets());

  for (std::size_t l = 0; l < serial.network.weights.size(); ++l) {
    CHECK(oracle::bit_equal(sharded_a.network.weights[l], sharded_b.network.weights[l]));
    CHECK((sharded_a.network.weights[l] - serial.network.weights[l]).cwiseAbs().maxCoeff() <
          1e-9);
  }
}

TEST_CASE("a short final batch and clamped shard count are handled") {
  std::mt19937_64 rng(6);
  TrainConfig config(Topology({3, 2, 2}));
  config.eta = 0.3;
  config.epochs = 3;
  config.batch_size = 4;
  config.shards = 4;
  config.seed = 2;
  Matrix inputs = oracle::random_matrix(rng, 5, 3, 0.0, 1.0);
  Matrix targets = oracle::random_matrix(rng, 5, 2, 0.0, 1.0);
  TrainResult a = train(config, inputs, targets);
  TrainResult b = train(config, inputs, targets);
  CHECK(a.epoch_errors.size() == 3);
  CHECK(a.epoch_wall_ms.size() == 3);
  for (std::size_t l = 0; l < a.network.weights.size(); ++l) {
    CHECK(oracle::bit_equal(a.network.weights[l], b.network.weights[l]));
  }
}

TEST_CASE("concurrent shard evaluation never writes to the shared network") {
  std::mt19937_64 rng(8);
  Network net = init_weights(Topology({3, 4, 2}), 9);
  Network before = net;
  Matrix inputs = oracle::random_matrix(rng, 8, 3, 0.0, 1.0);
  Matrix targets = oracle::random_matrix(rng, 8, 2, 0.0, 1.0);
  std::vector<MicroBatch> shards = split(inputs, targets, 4);

  std::vector<GradientSet> parallel(shards.size());
  {
    std::vector<std::jthread> workers;
    for (std::size_t i = 0; i < shards.size(); ++i) {
      workers.emplace_back([&net, &shards, &parallel, i] {
        parallel[i] = detail::shard_gradient(net, shards[i]);
      });
    }
  }
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    CHECK(oracle::bit_equal(net.weights[l], before.weights[l]));
  }
  for (std::size_t i = 0; i < shards.size(); ++i) {
    GradientSet serial = detail::shard_gradient(net, shards[i]);
    for (std::size_t l = 0; l < serial.grads.size(); ++l) {
      CHECK(oracle::bit_equal(parallel[i].grads[l], serial.grads[l]));
    }
  }
}

TEST_CASE("per-epoch error matches a fresh evaluation of the final network") {
  TrainConfig config = xor_config(21, 2);
  TrainResult result = train(config, xor_inputs(), xor_targets());
  ErrorReport fresh = sse(forward(result.network, xor_inputs()).output(), xor_targets());
  CHECK(result.epoch_errors.back().total == fresh.total);
}
