// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdml/tensor.hpp"

namespace rdml {

enum class Split { train, test };

// Immutable classification dataset with a train/test index split.
struct Dataset {
  Tensor features;                   // [N, d]
  std::vector<std::int64_t> labels;  // [N], each in [0, class_count)
  std::size_t class_count = 0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_count() const { return features.shape()[1]; }
  const std::vector<std::size_t>& indices(Split split) const {
    return split == Split::train ? train_indices : test_indices;
  }
};

// M Gaussian clusters in d dimensions: cluster means ~ U(-3, 3)^d, points =
// mean + spread * standard normal noise, labels round-robin over clusters.
// Split is 80/20 by a seeded permutation. Features are standardized per
// dimension to zero mean / unit variance measured on the train split and
// applied to every row. Deterministic per seed.
// Requires n >= m, d >= 2, m >= 2, spread > 0.
Dataset make_blobs(std::size_t n, std::size_t d, std::size_t m,
                   double cluster_spread, std::uint64_t seed);

// On-disk format: tab-separated with a header row. Feature columns in order,
// a column named by label_column holding integer class labels, and an
// optional column named by split_column holding 0 (train) / 1 (test). When
// the split column is absent the first 80% of rows (file order) are train.
struct DelimitedSchema {
  std::string label_column = "label";
  std::string split_column = "split";
  std::size_t class_count = 0;  // 0 = infer as max label + 1
};

// Parse errors and out-of-range labels throw std::runtime_error naming the
// 1-based line number.
Dataset load_delimited(const std::string& path, const DelimitedSchema& schema);

// Writes features, label, and split columns; doubles are printed with
// round-trip precision so save -> load is bitwise faithful.
void save_delimited(const Dataset& dataset, const std::string& path,
                    const DelimitedSchema& schema);

struct Batch {
  Tensor x;                     // [b, d]
  std::vector<std::int64_t> y;  // [b]
};

// Seeded shuffle of the split's indices, then consecutive slices of
// batch_size; the final short batch is kept, so the union of batches covers
// the split exactly once. Requires batch_size >= 1 and a non-empty split.
std::vector<Batch> batches(const Dataset& dataset, Split split,
                           std::size_t batch_size, std::uint64_t epoch_seed);

// The feature/label rows for an explicit index list (used for evaluation).
Batch gather_batch(const Dataset& dataset,
                   const std::vector<std::size_t>& indices);

}  // namespace rdml
