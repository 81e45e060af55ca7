#pragma once

#include "batchnet/matrix.hpp"
#include "batchnet/network.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace batchnet {

/// Malformed file; message carries path and 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& message)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + message) {}
};

/// Shortest decimal that round-trips back to the same 64-bit value.
inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

/// Whole-token parse; rejects inf, nan, and trailing characters.
inline double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw std::invalid_argument("not a finite number: '" + std::string(text) + "'");
  }
  return value;
}

template <typename Int>
inline Int parse_integer(std::string_view text) {
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

namespace detail {

/// Keeps empty tokens so ragged or blank fields surface as errors.
inline std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      tokens.push_back(text.substr(start));
      return tokens;
    }
    tokens.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::string require(const std::string& what) {
    std::string line;
    if (!next(line)) fail("unexpected end of file, expected " + what);
    return line;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(path_, line_ == 0 ? 1 : line_, message);
  }

 private:
  std::istream& in_;
  std::string path_;
  std::size_t line_ = 0;
};

}  // namespace detail

inline constexpr std::string_view kCheckpointMagic = "batchnet checkpoint v1";

/// Run fingerprint stored alongside the weights.
struct CheckpointMeta {
  double eta = 0.5;
  Eigen::Index batch_size = 4;
  int shards = 1;
  std::uint64_t seed = 1;
  std::int64_t epochs_completed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  Network network;
  CheckpointMeta meta;
};

inline void save_checkpoint(const Network& net, const CheckpointMeta& meta, std::ostream& out) {
  validate(net);
  out << kCheckpointMagic << '\n';
  out << "eta " << format_double(meta.eta) << '\n';
  out << "batch_size " << meta.batch_size << '\n';
  out << "shards " << meta.shards << '\n';
  out << "seed " << meta.seed << '\n';
  out << "epochs_completed " << meta.epochs_completed << '\n';
  out << "topology ";
  const auto& sizes = net.topology.layer_sizes();
  for (std::size_t i = 0; i < sizes.size(); ++i) out << (i ? "," : "") << sizes[i];
  out << '\n';
  out << "layers " << net.weights.size() << '\n';
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const Matrix& w = net.weights[l];
    out << "layer " << l << ' ' << w.rows() << ' ' << w.cols() << '\n';
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        out << (c ? " " : "") << format_double(w(r, c));
      }
      out << '\n';
    }
  }
}

inline void save_checkpoint(const Network& net, const CheckpointMeta& meta,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_checkpoint(net, meta, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(std::istream& in, const std::string& path) {
  detail::LineReader reader(in, path);

  const std::string magic = reader.require("format header");
  if (magic != kCheckpointMagic) reader.fail("unsupported format header '" + magic + "'");

  const auto keyed = [&](const std::string& key) -> std::string {
    const std::string line = reader.require("'" + key + "' line");
    if (line.size() <= key.size() + 1 || line.compare(0, key.size(), key) != 0 ||
        line[key.size()] != ' ') {
      reader.fail("expected '" + key + " <value>', got '" + line + "'");
    }
    return line.substr(key.size() + 1);
  };
  const auto parse = [&](auto fn, std::string_view text) {
    try {
      return fn(text);
    } catch (const std::invalid_argument& e) {
      reader.fail(e.what());
    }
  };

  CheckpointMeta meta;
  meta.eta = parse(parse_double, keyed("eta"));
  meta.batch_size = parse(parse_integer<Eigen::Index>, keyed("batch_size"));
  meta.shards = parse(parse_integer<int>, keyed("shards"));
  meta.seed = parse(parse_integer<std::uint64_t>, keyed("seed"));
  meta.epochs_completed = parse(parse_integer<std::int64_t>, keyed("epochs_completed"));

  std::vector<Eigen::Index> sizes;
  const std::string topology_line = keyed("topology");
  for (std::string_view token : detail::split(topology_line, ',')) {
    sizes.push_back(parse(parse_integer<Eigen::Index>, token));
  }
  const Topology topology = [&]() -> Topology {
    try {
      return Topology(sizes);
    } catch (const std::invalid_argument& e) {
      reader.fail(e.what());
    }
  }();

  const std::size_t layers = parse(parse_integer<std::size_t>, keyed("layers"));
  if (layers != topology.weight_layer_count()) {
    reader.fail("layer count " + std::to_string(layers) + " does not match topology");
  }

  std::vector<Matrix> weights;
  weights.reserve(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string header_line = reader.require("layer header");
    const auto header = detail::split(header_line, ' ');
    if (header.size() != 4 || header[0] != "layer") {
      reader.fail("expected 'layer <index> <rows> <cols>'");
    }
    const auto index = parse(parse_integer<std::size_t>, header[1]);
    const auto rows = parse(parse_integer<Eigen::Index>, header[2]);
    const auto cols = parse(parse_integer<Eigen::Index>, header[3]);
    if (index != l) reader.fail("expected layer " + std::to_string(l));
    if (rows != topology.layer_sizes()[l] + 1 || cols != topology.layer_sizes()[l + 1]) {
      reader.fail("layer " + std::to_string(l) + " shape " + shape_str(rows, cols) +
                  " does not match topology");
    }
    Matrix w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const std::string row_line = reader.require("weight row");
      const auto tokens = detail::split(row_line, ' ');
      if (static_cast<Eigen::Index>(tokens.size()) != cols) {
        reader.fail("expected " + std::to_string(cols) + " values, got " +
                    std::to_string(tokens.size()));
      }
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = parse(parse_double, tokens[c]);
    }
    weights.push_back(std::move(w));
  }

  std::string rest;
  if (reader.next(rest)) reader.fail("trailing content after last layer");
  return Checkpoint{Network{topology, std::move(weights)}, meta};
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return load_checkpoint(in, path);
}

struct Dataset {
  Matrix inputs;
  Matrix targets;
};

/// Header names declare the split: x-prefixed input columns followed by
/// t-prefixed target columns, at least one of each. Every data row needs
/// exactly one finite value per column.
inline Dataset load_dataset(std::istream& in, const std::string& path) {
  detail::LineReader reader(in, path);

  std::string header;
  if (!reader.next(header)) reader.fail("empty file");
  const auto columns = detail::split(header, ',');
  std::size_t n = 0;
  while (n < columns.size() && !columns[n].empty() && columns[n].front() == 'x') ++n;
  if (n == 0) reader.fail("header must start with an x-prefixed input column");
  for (std::size_t i = n; i < columns.size(); ++i) {
    if (columns[i].empty() || columns[i].front() != 't') {
      reader.fail("header column '" + std::string(columns[i]) +
                  "' must be t-prefixed after the inputs");
    }
  }
  const std::size_t m = columns.size() - n;
  if (m == 0) reader.fail("header has no t-prefixed target columns");

  std::vector<double> values;
  std::size_t rows = 0;
  std::string line;
  while (reader.next(line)) {
    const auto fields = detail::split(line, ',');
    if (fields.size() != n + m) {
      reader.fail("expected " + std::to_string(n + m) + " fields, got " +
                  std::to_string(fields.size()));
    }
    for (std::string_view field : fields) {
      try {
        values.push_back(parse_double(field));
      } catch (const std::invalid_argument& e) {
        reader.fail(e.what());
      }
    }
    ++rows;
  }
  if (rows == 0) reader.fail("no data rows after header");

  Dataset data{Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n)),
               Matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(m))};
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * (n + m);
    for (std::size_t c = 0; c < n; ++c) {
      data.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[base + c];
    }
    for (std::size_t c = 0; c < m; ++c) {
      data.targets(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          values[base + n + c];
    }
  }
  return data;
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return load_dataset(in, path);
}

inline void save_dataset(const MatrixRef& inputs, const MatrixRef& targets, std::ostream& out) {
  if (inputs.rows() != targets.rows()) {
    throw ShapeError("save_dataset", inputs.rows(), inputs.cols(), targets.rows(), targets.cols());
  }
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) out << (c ? "," : "") << 'x' << (c + 1);
  for (Eigen::Index c = 0; c < targets.cols(); ++c) out << ",t" << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
      out << (c ? "," : "") << format_double(inputs(r, c));
    }
    for (Eigen::Index c = 0; c < targets.cols(); ++c) out << ',' << format_double(targets(r, c));
    out << '\n';
  }
}

inline void save_dataset(const MatrixRef& inputs, const MatrixRef& targets,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save_dataset(inputs, targets, out);
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace batchnet
