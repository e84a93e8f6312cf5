// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdml/tensor.hpp"

namespace rdml {

// Fully-connected ReLU classifier. layer_sizes = (input, hidden..., classes);
// layer l maps sizes[l] -> sizes[l+1] with weight [sizes[l], sizes[l+1]] and
// bias [sizes[l+1]]. ReLU after every layer except the last; the last layer
// emits logits.
struct StudentModel {
  std::vector<std::size_t> layer_sizes;
  std::uint64_t seed = 0;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t layer_count() const { return weights.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t class_count() const { return layer_sizes.back(); }
};

// Glorot-uniform weights, U(-sqrt(6/(fan_in+fan_out)), +...), drawn from a
// generator seeded with `seed`; biases zero. Same (sizes, seed) is
// bitwise-reproducible. Requires >= 2 layer sizes, all positive.
StudentModel init_student(const std::vector<std::size_t>& layer_sizes,
                          std::uint64_t seed);

// Logits [n, classes] for inputs x [n, input_size]. Recorded on a tape only
// when the parameters are watched.
Tensor forward(const StudentModel& model, const Tensor& x);

// Parameters in a fixed order (per layer: weight, then bias) — the order the
// optimizer state and checkpoints rely on.
std::vector<Tensor*> parameters(StudentModel& model);
std::vector<const Tensor*> parameters(const StudentModel& model);

// Total scalar parameter count: sum over layers of (fan_in+1)*fan_out.
std::size_t parameter_count(const StudentModel& model);

// Checkpoint: tab-separated text, stable across versions and bitwise
// round-trippable (doubles are printed with round-trip precision):
//   rdml-checkpoint v1
//   layers <tab-separated layer sizes>
//   seed <seed>
//   then per layer: "W<l> <fan_in> <fan_out>" followed by fan_in value rows,
//   and "b<l> <fan_out>" followed by one value row.
void save_checkpoint(const StudentModel& model, const std::string& path);
StudentModel load_checkpoint(const std::string& path);

}  // namespace rdml
