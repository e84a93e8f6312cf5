// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "rdml/dataset.hpp"
#include "rdml/divergence.hpp"
#include "rdml/model.hpp"

namespace rdml {

// Cohort training hyperparameters. Each student minimizes
//   L_k = cross_entropy_k + psi * (1/(K-1)) * sum_{k' != k} mean_batch
//         renyi(P_k' || P_k)
// with peer distributions P_k' treated as constants. psi = 0 or K = 1
// disables the divergence term entirely, reducing to independent training.
struct TrainConfig {
  std::size_t cohort_size = 2;  // K >= 1
  double alpha = 1.0;
  double psi = 1.0;             // divergence scale >= 0
  double lr0 = 0.1;             // initial learning rate, > 0
  double momentum = 0.9;        // in [0, 1)
  bool nesterov = true;
  double weight_decay = 0.0;    // >= 0; applied as g += weight_decay * theta
  double lr_decay_factor = 1.0;          // in (0, 1]
  std::vector<std::size_t> lr_decay_epochs;  // 1-based epoch numbers; the
                                             // factor applies at the start of
                                             // each listed epoch
  std::optional<double> clip_max_norm;   // > 0 when set; clips the composed
                                         // update step by global L2 norm
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;       // drives per-epoch shuffling only
  bool simultaneous_updates = false;  // ablation: all gradients from pre-step
                                      // weights instead of sequential updates
  bool swap_divergence_direction = false;  // ablation: renyi(P_k || P_k')
  double epsilon_floor = 1e-12;
  double kl_switch_tol = 2e-4;

  DivergenceSpec divergence_spec() const {
    return DivergenceSpec{alpha, epsilon_floor, kl_switch_tol};
  }
  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

// Per-parameter velocity buffers, zero-initialized, shapes mirroring the
// model's parameter order.
struct OptimizerState {
  std::vector<std::vector<double>> velocity;
};

OptimizerState make_optimizer_state(const StudentModel& model);

// The student loss split into its parts. `total` stays on the caller's tape;
// the scalar fields let tests and logs check the decomposition exactly
// (total's value is base + scaled_divergence up to one rounding in the add;
// scaled_divergence itself is the tape's psi * divergence product).
struct DmlLossTerms {
  Tensor total;
  double base = 0.0;               // cross-entropy value
  double divergence = 0.0;         // peer-mean divergence, before psi
  double scaled_divergence = 0.0;  // psi * divergence as computed on the tape
};

// Loss for student k on a shared batch. Peer forward passes run off-tape, so
// no gradient reaches peer parameters. For K = 1 or psi = 0 the divergence
// term is skipped and total == base exactly.
DmlLossTerms dml_loss(std::size_t k, const Batch& batch,
                      const std::vector<StudentModel>& models,
                      const DivergenceSpec& spec, double psi,
                      bool swap_direction = false);

// One optimizer application for a single student: g += weight_decay * theta,
// v = momentum * v + g, step = g + momentum * v (Nesterov) or v, clip step by
// global L2 norm when configured, theta -= lr * step.
void apply_update(StudentModel& model, OptimizerState& state,
                  const std::vector<std::vector<double>>& grads,
                  const TrainConfig& config, double lr);

// One cohort step on one batch; returns each student's loss decomposition.
// Sequential mode (default) updates student k before computing student k+1's
// loss, so later students see earlier students' fresh weights within the
// step. Simultaneous mode computes every gradient from the pre-step weights
// first, then applies all updates. Non-finite losses or gradients abort with
// std::runtime_error naming the student.
std::vector<DmlLossTerms> train_step(std::vector<StudentModel>& models,
                                     std::vector<OptimizerState>& opt_states,
                                     const Batch& batch,
                                     const TrainConfig& config, double lr);

// One row per (epoch, student). epoch is 1-based; student is the 0-based
// cohort index. train_loss is the epoch's per-datum mean of the full student
// loss (measured during updates); test_loss is the cross-entropy on the test
// split after the epoch; test_accuracy is top-1 percent in [0, 100] with
// exact probability ties broken toward the lowest class index.
struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t student = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // percent
};

EvalResult evaluate(const StudentModel& model, const Dataset& dataset,
                    Split split);

// Full training loop: per-epoch seeded shuffles (seed derived from
// config.seed and the epoch number), LR step decay, K records per epoch.
// Deterministic given (config, model seeds, data). models.size() must equal
// config.cohort_size.
std::vector<EpochRecord> train(std::vector<StudentModel>& models,
                               const Dataset& data, const TrainConfig& config);

// Tab-separated epoch log with header: epoch, student, train_loss,
// test_loss, test_acc. Doubles printed with round-trip precision.
void write_epoch_log(const std::vector<EpochRecord>& records,
                     std::ostream& out);

}  // namespace rdml
