#include "batchnet/batching.hpp"
#include "batchnet/gradcheck.hpp"
#include "batchnet/persistence.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace {

using batchnet::Matrix;

/// Flag-level mistake the user must fix; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Setter = std::function<void(const std::string&)>;

/// key=value lines; blank lines and #-comments skipped. Values override
/// whatever the flags said.
void apply_config(const std::string& path, const std::map<std::string, Setter>& setters) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(where + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    const auto it = setters.find(key);
    if (it == setters.end()) throw UsageError(where + ": unknown key '" + key + "'");
    try {
      it->second(value);
    } catch (const std::invalid_argument& e) {
      throw UsageError(where + ": " + e.what());
    }
  }
}

std::vector<Eigen::Index> parse_size_list(const std::string& text) {
  std::vector<Eigen::Index> sizes;
  for (std::string_view token : batchnet::detail::split(text, ',')) {
    sizes.push_back(batchnet::parse_integer<Eigen::Index>(token));
  }
  return sizes;
}

void write_metrics(const std::string& path, const batchnet::TrainResult& result,
                   Eigen::Index output_count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "epoch,total_error";
  for (Eigen::Index c = 0; c < output_count; ++c) out << ",out_mean_" << (c + 1);
  out << ",wall_ms\n";
  for (std::size_t e = 0; e < result.epoch_errors.size(); ++e) {
    const batchnet::ErrorReport& report = result.epoch_errors[e];
    out << (e + 1) << ',' << batchnet::format_double(report.total);
    for (Eigen::Index c = 0; c < output_count; ++c) {
      out << ',' << batchnet::format_double(report.per_output_mean(c));
    }
    out << ',' << batchnet::format_double(result.epoch_wall_ms[e]) << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct TrainFlags {
  std::string data;
  std::string topology;
  std::string out;
  std::string metrics;
  std::string config;
  double eta = 0.5;
  std::int64_t epochs = -1;
  Eigen::Index batch_size = 4;
  int shards = 1;
  std::uint64_t seed = 1;
};

int run_train(TrainFlags flags) {
  if (!flags.config.empty()) {
    apply_config(flags.config,
                 {{"data", [&](const std::string& v) { flags.data = v; }},
                  {"topology", [&](const std::string& v) { flags.topology = v; }},
                  {"out", [&](const std::string& v) { flags.out = v; }},
                  {"metrics", [&](const std::string& v) { flags.metrics = v; }},
                  {"eta", [&](const std::string& v) { flags.eta = batchnet::parse_double(v); }},
                  {"epochs",
                   [&](const std::string& v) {
                     flags.epochs = batchnet::parse_integer<std::int64_t>(v);
                   }},
                  {"batch-size",
                   [&](const std::string& v) {
                     flags.batch_size = batchnet::parse_integer<Eigen::Index>(v);
                   }},
                  {"shards",
                   [&](const std::string& v) { flags.shards = batchnet::parse_integer<int>(v); }},
                  {"seed", [&](const std::string& v) {
                     flags.seed = batchnet::parse_integer<std::uint64_t>(v);
                   }}});
  }
  if (flags.data.empty()) throw UsageError("missing --data");
  if (flags.topology.empty()) throw UsageError("missing --topology");
  if (flags.epochs < 0) throw UsageError("missing --epochs");

  batchnet::TrainConfig config(batchnet::Topology(parse_size_list(flags.topology)));
  config.eta = flags.eta;
  config.epochs = flags.epochs;
  config.batch_size = flags.batch_size;
  config.shards = flags.shards;
  config.seed = flags.seed;

  const batchnet::Dataset data = batchnet::load_dataset(flags.data);
  const batchnet::TrainResult result = batchnet::train(config, data.inputs, data.targets);

  if (!flags.out.empty()) {
    batchnet::CheckpointMeta meta;
    meta.eta = config.eta;
    meta.batch_size = config.batch_size;
    meta.shards = config.shards;
    meta.seed = config.seed;
    meta.epochs_completed = config.epochs;
    batchnet::save_checkpoint(result.network, meta, flags.out);
  }
  if (!flags.metrics.empty()) {
    write_metrics(flags.metrics, result, config.topology.output_count());
  }
  if (result.epoch_errors.empty()) {
    std::cerr << "trained 0 epochs (initialization only)\n";
  } else {
    std::cerr << "trained " << flags.epochs << " epochs, final total error "
              << batchnet::format_double(result.epoch_errors.back().total) << '\n';
  }
  return 0;
}

struct EvalFlags {
  std::string data;
  std::string checkpoint;
  std::string config;
};

int run_eval(EvalFlags flags) {
  if (!flags.config.empty()) {
    apply_config(flags.config,
                 {{"data", [&](const std::string& v) { flags.data = v; }},
                  {"checkpoint", [&](const std::string& v) { flags.checkpoint = v; }}});
  }
  if (flags.data.empty()) throw UsageError("missing --data");
  if (flags.checkpoint.empty()) throw UsageError("missing --checkpoint");

  const batchnet::Checkpoint checkpoint = batchnet::load_checkpoint(flags.checkpoint);
  const batchnet::Dataset data = batchnet::load_dataset(flags.data);
  const Eigen::Index n = checkpoint.network.topology.feature_count();
  const Eigen::Index m = checkpoint.network.topology.output_count();
  if (data.inputs.cols() != n) {
    throw std::runtime_error("dataset has " + std::to_string(data.inputs.cols()) +
                             " input columns, checkpoint expects " + std::to_string(n));
  }
  if (data.targets.cols() != m) {
    throw std::runtime_error("dataset has " + std::to_string(data.targets.cols()) +
                             " target columns, checkpoint expects " + std::to_string(m));
  }

  const batchnet::ErrorReport report =
      batchnet::sse(batchnet::forward(checkpoint.network, data.inputs).output(), data.targets);
  std::cout << "field,index,value\n";
  std::cout << "total,," << batchnet::format_double(report.total) << '\n';
  for (Eigen::Index r = 0; r < report.per_row_total.size(); ++r) {
    std::cout << "per_row_total," << r << ',' << batchnet::format_double(report.per_row_total(r))
              << '\n';
  }
  for (Eigen::Index c = 0; c < report.per_output_mean.size(); ++c) {
    std::cout << "per_output_mean," << c << ','
              << batchnet::format_double(report.per_output_mean(c)) << '\n';
  }
  return 0;
}

struct GradcheckFlags {
  std::string topology = "2,2,2";
  std::uint64_t seed = 1;
  Eigen::Index batch = 2;
  double epsilon = 1e-5;
  double rtol = 1e-5;
  std::string config;
};

int run_gradcheck(GradcheckFlags flags) {
  if (!flags.config.empty()) {
    apply_config(
        flags.config,
        {{"topology", [&](const std::string& v) { flags.topology = v; }},
         {"seed",
          [&](const std::string& v) { flags.seed = batchnet::parse_integer<std::uint64_t>(v); }},
         {"batch",
          [&](const std::string& v) { flags.batch = batchnet::parse_integer<Eigen::Index>(v); }},
         {"epsilon", [&](const std::string& v) { flags.epsilon = batchnet::parse_double(v); }},
         {"rtol", [&](const std::string& v) { flags.rtol = batchnet::parse_double(v); }}});
  }
  if (flags.batch < 1) throw std::invalid_argument("--batch must be >= 1");
  if (!(flags.rtol >= 0.0)) throw std::invalid_argument("--rtol must be >= 0");

  const batchnet::Topology topology(parse_size_list(flags.topology));
  const batchnet::Network net = batchnet::init_weights(topology, flags.seed);

  std::mt19937_64 rng(flags.seed);
  const auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Matrix inputs(flags.batch, topology.feature_count());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) inputs(r, c) = unit();
  }
  Matrix targets(flags.batch, topology.output_count());
  for (Eigen::Index r = 0; r < targets.rows(); ++r) {
    for (Eigen::Index c = 0; c < targets.cols(); ++c) targets(r, c) = unit();
  }

  const batchnet::GradientSet analytic =
      batchnet::backward(net, batchnet::forward(net, inputs), targets);
  const batchnet::GradientSet numeric =
      batchnet::numeric_gradient(net, inputs, targets, flags.epsilon);
  const batchnet::GradCheckReport report = batchnet::compare(analytic, numeric, flags.rtol);

  std::cout << "field,index,value\n";
  std::cout << "passed,," << (report.passed ? "true" : "false") << '\n';
  std::cout << "max_relative_error,," << batchnet::format_double(report.max_relative_error)
            << '\n';
  std::cout << "rtol,," << batchnet::format_double(report.rtol) << '\n';
  std::cout << "worst_layer,," << report.worst_location.layer << '\n';
  std::cout << "worst_row,," << report.worst_location.row << '\n';
  std::cout << "worst_col,," << report.worst_location.col << '\n';
  for (std::size_t l = 0; l < report.per_layer_max.size(); ++l) {
    std::cout << "layer_max," << l << ',' << batchnet::format_double(report.per_layer_max[l])
              << '\n';
  }
  return report.passed ? 0 : 1;
}

struct SweepFlags {
  std::string data;
  std::string topology;
  std::string sizes;
  std::string out;
  std::string config;
  double eta = 0.5;
  std::int64_t epochs = -1;
  std::uint64_t seed = 1;
};

int run_batch_sweep(SweepFlags flags) {
  if (!flags.config.empty()) {
    apply_config(
        flags.config,
        {{"data", [&](const std::string& v) { flags.data = v; }},
         {"topology", [&](const std::string& v) { flags.topology = v; }},
         {"sizes", [&](const std::string& v) { flags.sizes = v; }},
         {"out", [&](const std::string& v) { flags.out = v; }},
         {"eta", [&](const std::string& v) { flags.eta = batchnet::parse_double(v); }},
         {"epochs",
          [&](const std::string& v) { flags.epochs = batchnet::parse_integer<std::int64_t>(v); }},
         {"seed", [&](const std::string& v) {
            flags.seed = batchnet::parse_integer<std::uint64_t>(v);
          }}});
  }
  if (flags.data.empty()) throw UsageError("missing --data");
  if (flags.topology.empty()) throw UsageError("missing --topology");
  if (flags.sizes.empty()) throw UsageError("missing --sizes");
  if (flags.epochs < 0) throw UsageError("missing --epochs");

  const batchnet::Topology topology(parse_size_list(flags.topology));
  const std::vector<Eigen::Index> sizes = parse_size_list(flags.sizes);
  const batchnet::Dataset data = batchnet::load_dataset(flags.data);
  for (Eigen::Index size : sizes) {
    if (size > data.inputs.rows()) {
      throw std::runtime_error("batch size " + std::to_string(size) + " exceeds dataset rows (" +
                               std::to_string(data.inputs.rows()) + ")");
    }
  }

  std::ofstream file;
  if (!flags.out.empty()) {
    file.open(flags.out, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open for writing: " + flags.out);
  }
  std::ostream& out = flags.out.empty() ? std::cout : file;

  out << "batch_size,final_error,epochs,wall_time_ms\n";
  for (Eigen::Index size : sizes) {
    batchnet::TrainConfig config(topology);
    config.eta = flags.eta;
    config.epochs = flags.epochs;
    config.batch_size = size;
    config.shards = 1;
    config.seed = flags.seed;

    const auto start = std::chrono::steady_clock::now();
    const batchnet::TrainResult result = batchnet::train(config, data.inputs, data.targets);
    const std::chrono::duration<double, std::milli> elapsed =
        std::chrono::steady_clock::now() - start;

    const double final_error =
        result.epoch_errors.empty()
            ? batchnet::sse(batchnet::forward(result.network, data.inputs).output(), data.targets)
                  .total
            : result.epoch_errors.back().total;
    out << size << ',' << batchnet::format_double(final_error) << ',' << flags.epochs << ','
        << batchnet::format_double(elapsed.count()) << '\n';
  }
  out.flush();
  if (!out) throw std::runtime_error("write failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dense feedforward network trainer (sigmoid units, batch gradient descent)"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train a network, write checkpoint and metrics");
  train->add_option("--data", train_flags.data, "dataset CSV path");
  train->add_option("--topology", train_flags.topology, "layer sizes, e.g. 2,2,1");
  train->add_option("--eta", train_flags.eta, "learning rate")->capture_default_str();
  train->add_option("--epochs", train_flags.epochs, "training epochs");
  train->add_option("--batch-size", train_flags.batch_size, "rows per update")->capture_default_str();
  train->add_option("--shards", train_flags.shards, "micro-batches per batch")->capture_default_str();
  train->add_option("--seed", train_flags.seed, "weight init seed")->capture_default_str();
  train->add_option("--out", train_flags.out, "checkpoint output path");
  train->add_option("--metrics", train_flags.metrics, "per-epoch metrics CSV path");
  train->add_option("--config", train_flags.config, "key=value file overriding flags");

  EvalFlags eval_flags;
  CLI::App* eval = app.add_subcommand("eval", "report error of a checkpoint on a dataset");
  eval->add_option("--data", eval_flags.data, "dataset CSV path");
  eval->add_option("--checkpoint", eval_flags.checkpoint, "checkpoint path");
  eval->add_option("--config", eval_flags.config, "key=value file overriding flags");

  GradcheckFlags grad_flags;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gradcheck->add_option("--topology", grad_flags.topology, "layer sizes")->capture_default_str();
  gradcheck->add_option("--seed", grad_flags.seed, "weight and data seed")->capture_default_str();
  gradcheck->add_option("--batch", grad_flags.batch, "probe batch rows")->capture_default_str();
  gradcheck->add_option("--epsilon", grad_flags.epsilon, "finite-difference step")->capture_default_str();
  gradcheck->add_option("--rtol", grad_flags.rtol, "relative error tolerance")->capture_default_str();
  gradcheck->add_option("--config", grad_flags.config, "key=value file overriding flags");

  SweepFlags sweep_flags;
  CLI::App* sweep =
      app.add_subcommand("batch-sweep", "train at several batch sizes, tabulate final error");
  sweep->add_option("--data", sweep_flags.data, "dataset CSV path");
  sweep->add_option("--topology", sweep_flags.topology, "layer sizes");
  sweep->add_option("--eta", sweep_flags.eta, "learning rate")->capture_default_str();
  sweep->add_option("--epochs", sweep_flags.epochs, "training epochs per size");
  sweep->add_option("--sizes", sweep_flags.sizes, "batch sizes, e.g. 1,2,4");
  sweep->add_option("--seed", sweep_flags.seed, "weight init seed")->capture_default_str();
  sweep->add_option("--out", sweep_flags.out, "sweep CSV path (default: standard output)");
  sweep->add_option("--config", sweep_flags.config, "key=value file overriding flags");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(train)) return run_train(train_flags);
    if (app.got_subcommand(eval)) return run_eval(eval_flags);
    if (app.got_subcommand(gradcheck)) return run_gradcheck(grad_flags);
    return run_batch_sweep(sweep_flags);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
