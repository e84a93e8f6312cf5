// SPDX-License-Identifier: Apache-2.0
#include "rdml/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rdml/rng.hpp"
#include "rdml/text.hpp"

namespace rdml {

namespace {

constexpr double kMeanRange = 3.0;  // cluster means ~ U(-3, 3) per dimension

// Zero mean / unit variance per dimension, fit on the train rows only.
void standardize(std::vector<double>& features, std::size_t n, std::size_t d,
                 const std::vector<std::size_t>& train_indices) {
  const auto train_n = static_cast<double>(train_indices.size());
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t idx : train_indices) {
      mean += features[idx * d + j];
    }
    mean /= train_n;
    double var = 0.0;
    for (std::size_t idx : train_indices) {
      const double c = features[idx * d + j] - mean;
      var += c * c;
    }
    var /= train_n;
    const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      features[i * d + j] = (features[i * d + j] - mean) * scale;
    }
  }
}

}  // namespace

Dataset make_blobs(std::size_t n, std::size_t d, std::size_t m,
                   double cluster_spread, std::uint64_t seed) {
  if (m < 2 || d < 2 || n < m) {
    throw std::invalid_argument("make_blobs: need n >= m, d >= 2, m >= 2");
  }
  if (!(cluster_spread > 0.0)) {
    throw std::invalid_argument("make_blobs: spread must be > 0");
  }

  Rng rng(seed);
  std::vector<double> means(m * d);
  for (double& v : means) {
    v = rng.uniform(-kMeanRange, kMeanRange);
  }

  std::vector<double> features(n * d);
  std::vector<std::int64_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t cluster = i % m;
    labels[i] = static_cast<std::int64_t>(cluster);
    for (std::size_t j = 0; j < d; ++j) {
      features[i * d + j] =
          means[cluster * d + j] + cluster_spread * rng.normal();
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t train_n = n * 4 / 5;
  Dataset ds;
  ds.train_indices.assign(order.begin(), order.begin() + train_n);
  ds.test_indices.assign(order.begin() + train_n, order.end());
  // Canonical ascending order: the split stays a seeded random subset, but
  // the lists round-trip bitwise through save/load (which stores flags in
  // row order) and batching re-shuffles per epoch anyway.
  std::sort(ds.train_indices.begin(), ds.train_indices.end());
  std::sort(ds.test_indices.begin(), ds.test_indices.end());

  standardize(features, n, d, ds.train_indices);
  ds.features = Tensor({n, d}, std::move(features));
  ds.labels = std::move(labels);
  ds.class_count = m;
  return ds;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_number,
                             const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_number) + ": " +
                           what);
}

}  // namespace

Dataset load_delimited(const std::string& path,
                       const DelimitedSchema& schema) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw std::runtime_error("load_delimited: cannot open '" + path + "'");
  }
  std::string line;
  if (!std::getline(file, line)) {
    parse_fail(path, 1, "missing header row");
  }
  const std::vector<std::string> header = split(line, '\t');
  std::size_t label_col = header.size();
  std::size_t split_col = header.size();
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == schema.label_column) {
      label_col = c;
    } else if (!schema.split_column.empty() &&
               header[c] == schema.split_column) {
      split_col = c;
    } else {
      feature_cols.push_back(c);
    }
  }
  if (label_col == header.size()) {
    parse_fail(path, 1, "no column named '" + schema.label_column + "'");
  }
  if (feature_cols.empty()) {
    parse_fail(path, 1, "no feature columns");
  }

  std::vector<double> features;
  std::vector<std::int64_t> labels;
  std::vector<int> split_flags;
  std::size_t line_number = 1;
  while (std::getline(file, line)) {
    ++line_number;
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> tokens = split(line, '\t');
    if (tokens.size() != header.size()) {
      parse_fail(path, line_number,
                 "expected " + std::to_string(header.size()) + " columns, got " +
                     std::to_string(tokens.size()));
    }
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!try_parse_double(tokens[c], v) || !std::isfinite(v)) {
        parse_fail(path, line_number, "bad feature value '" + tokens[c] + "'");
      }
      features.push_back(v);
    }
    long long label = 0;
    if (!try_parse_int64(tokens[label_col], label) || label < 0) {
      parse_fail(path, line_number, "bad label '" + tokens[label_col] + "'");
    }
    if (schema.class_count > 0 &&
        label >= static_cast<long long>(schema.class_count)) {
      parse_fail(path, line_number,
                 "label " + std::to_string(label) + " outside declared range [0, " +
                     std::to_string(schema.class_count) + ")");
    }
    labels.push_back(label);
    if (split_col < header.size()) {
      if (tokens[split_col] != "0" && tokens[split_col] != "1") {
        parse_fail(path, line_number,
                   "bad split flag '" + tokens[split_col] + "' (want 0 or 1)");
      }
      split_flags.push_back(tokens[split_col] == "1" ? 1 : 0);
    }
  }
  if (labels.empty()) {
    parse_fail(path, line_number, "no data rows");
  }

  Dataset ds;
  const std::size_t n = labels.size();
  const std::size_t d = feature_cols.size();
  ds.features = Tensor({n, d}, std::move(features));
  ds.labels = std::move(labels);
  ds.class_count =
      schema.class_count > 0
          ? schema.class_count
          : static_cast<std::size_t>(
                *std::max_element(ds.labels.begin(), ds.labels.end()) + 1);
  if (split_flags.empty()) {
    const std::size_t train_n = n * 4 / 5;
    for (std::size_t i = 0; i < n; ++i) {
      (i < train_n ? ds.train_indices : ds.test_indices).push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      (split_flags[i] == 0 ? ds.train_indices : ds.test_indices).push_back(i);
    }
  }
  return ds;
}

void save_delimited(const Dataset& dataset, const std::string& path,
                    const DelimitedSchema& schema) {
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.feature_count();
  std::vector<int> split_flags(n, 0);
  for (std::size_t idx : dataset.test_indices) {
    split_flags[idx] = 1;
  }

  std::ostringstream out;
  for (std::size_t j = 0; j < d; ++j) {
    out << 'f' << j << '\t';
  }
  out << schema.label_column << '\t' << schema.split_column << '\n';
  auto values = dataset.features.values();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out << format_double(values[i * d + j]) << '\t';
    }
    out << dataset.labels[i] << '\t' << split_flags[i] << '\n';
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream file(tmp, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw std::runtime_error("save_delimited: cannot open '" + tmp + "'");
    }
    file << out.str();
    if (!file.flush()) {
      throw std::runtime_error("save_delimited: write failed for '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("save_delimited: rename failed for '" + path + "'");
  }
}

Batch gather_batch(const Dataset& dataset,
                   const std::vector<std::size_t>& indices) {
  if (indices.empty()) {
    throw std::invalid_argument("gather_batch: empty index list");
  }
  const std::size_t d = dataset.feature_count();
  auto values = dataset.features.values();
  std::vector<double> x;
  x.reserve(indices.size() * d);
  std::vector<std::int64_t> y;
  y.reserve(indices.size());
  for (std::size_t idx : indices) {
    x.insert(x.end(), values.begin() + static_cast<std::ptrdiff_t>(idx * d),
             values.begin() + static_cast<std::ptrdiff_t>((idx + 1) * d));
    y.push_back(dataset.labels[idx]);
  }
  return Batch{Tensor({indices.size(), d}, std::move(x)), std::move(y)};
}

std::vector<Batch> batches(const Dataset& dataset, Split split,
                           std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size == 0) {
    throw std::invalid_argument("batches: batch_size must be >= 1");
  }
  std::vector<std::size_t> order = dataset.indices(split);
  if (order.empty()) {
    throw std::invalid_argument("batches: empty split");
  }
  Rng rng(epoch_seed);
  rng.shuffle(order);

  std::vector<Batch> result;
  result.reserve((order.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, order.size());
    result.push_back(gather_batch(
        dataset, std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end))));
  }
  return result;
}

}  // namespace rdml
