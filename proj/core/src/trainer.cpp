// SPDX-License-Identifier: Apache-2.0
#include "rdml/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rdml/rng.hpp"
#include "rdml/text.hpp"

namespace rdml {

void TrainConfig::validate() const {
  if (cohort_size < 1) {
    throw std::invalid_argument("TrainConfig: cohort_size must be >= 1");
  }
  divergence_spec().validate();
  if (!(psi >= 0.0) || !std::isfinite(psi)) {
    throw std::invalid_argument("TrainConfig: psi must be >= 0");
  }
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) {
    throw std::invalid_argument("TrainConfig: lr0 must be > 0");
  }
  if (!(momentum >= 0.0) || !(momentum < 1.0)) {
    throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
  }
  if (!(lr_decay_factor > 0.0) || lr_decay_factor > 1.0) {
    throw std::invalid_argument(
        "TrainConfig: lr_decay_factor must be in (0, 1]");
  }
  if (clip_max_norm && !(*clip_max_norm > 0.0)) {
    throw std::invalid_argument("TrainConfig: clip_max_norm must be > 0");
  }
  if (epochs < 1) {
    throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  }
}

OptimizerState make_optimizer_state(const StudentModel& model) {
  OptimizerState state;
  for (const Tensor* p : parameters(model)) {
    state.velocity.emplace_back(p->size(), 0.0);
  }
  return state;
}

DmlLossTerms dml_loss(std::size_t k, const Batch& batch,
                      const std::vector<StudentModel>& models,
                      const DivergenceSpec& spec, double psi,
                      bool swap_direction) {
  if (k >= models.size()) {
    throw std::invalid_argument("dml_loss: student index out of range");
  }
  if (!(psi >= 0.0) || !std::isfinite(psi)) {
    throw std::invalid_argument("dml_loss: psi must be >= 0");
  }
  const std::size_t cohort = models.size();

  Tensor log_probs = log_softmax(forward(models[k], batch.x));
  Tensor base = cross_entropy(log_probs, batch.y);

  DmlLossTerms terms;
  terms.base = base.item();
  if (cohort == 1 || psi == 0.0) {
    // No divergence graph at all, so these paths are bit-identical to
    // independent training.
    terms.total = base;
    return terms;
  }

  // Softmax output rows sum to 1 by construction; stays on the tape.
  const CategoricalBatch self{exp(log_probs)};
  Tensor divergence_sum;
  bool first = true;
  for (std::size_t peer = 0; peer < cohort; ++peer) {
    if (peer == k) {
      continue;
    }
    // Peer parameters are not watched, so this forward records nothing and
    // the peer's distribution enters the loss as a constant.
    const CategoricalBatch peer_probs =
        CategoricalBatch::from_logits(forward(models[peer], batch.x));
    Tensor per_row = swap_direction ? renyi(self, peer_probs, spec)
                                    : renyi(peer_probs, self, spec);
    Tensor contribution = mean(per_row);
    divergence_sum =
        first ? contribution : add(divergence_sum, contribution);
    first = false;
  }
  Tensor divergence_mean =
      mul(divergence_sum, Tensor(1.0 / static_cast<double>(cohort - 1)));
  Tensor scaled = mul(divergence_mean, Tensor(psi));
  terms.divergence = divergence_mean.item();
  terms.scaled_divergence = scaled.item();
  terms.total = add(base, scaled);
  return terms;
}

void apply_update(StudentModel& model, OptimizerState& state,
                  const std::vector<std::vector<double>>& grads,
                  const TrainConfig& config, double lr) {
  auto params = parameters(model);
  if (grads.size() != params.size() ||
      state.velocity.size() != params.size()) {
    throw std::invalid_argument("apply_update: parameter/buffer count mismatch");
  }

  // Compose each parameter's raw step first so the clip can act on the
  // global L2 norm of the whole composed update.
  std::vector<std::vector<double>> steps(params.size());
  double sq_norm = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i]->values();
    const std::size_t count = values.size();
    if (grads[i].size() != count || state.velocity[i].size() != count) {
      throw std::invalid_argument("apply_update: gradient shape mismatch");
    }
    steps[i].resize(count);
    for (std::size_t j = 0; j < count; ++j) {
      const double g = grads[i][j] + config.weight_decay * values[j];
      const double v = config.momentum * state.velocity[i][j] + g;
      state.velocity[i][j] = v;
      const double s = config.nesterov ? g + config.momentum * v : v;
      steps[i][j] = s;
      sq_norm += s * s;
    }
  }

  double scale = 1.0;
  if (config.clip_max_norm) {
    const double norm = std::sqrt(sq_norm);
    if (norm > *config.clip_max_norm) {
      scale = *config.clip_max_norm / norm;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i]->values_mut();
    for (std::size_t j = 0; j < values.size(); ++j) {
      values[j] -= lr * scale * steps[i][j];
    }
  }
}

namespace {

std::vector<std::vector<double>> collect_grads(StudentModel& model,
                                               std::size_t k) {
  std::vector<std::vector<double>> grads;
  for (Tensor* p : parameters(model)) {
    auto g = p->grad();
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw std::runtime_error(
            "train_step: non-finite gradient for student " +
            std::to_string(k));
      }
    }
    grads.emplace_back(g.begin(), g.end());
  }
  return grads;
}

DmlLossTerms student_backward(std::size_t k, const Batch& batch,
                              std::vector<StudentModel>& models,
                              const TrainConfig& config,
                              std::vector<std::vector<double>>& grads_out) {
  Tape tape;
  for (Tensor* p : parameters(models[k])) {
    tape.watch(*p);
  }
  DmlLossTerms terms;
  try {
    terms = dml_loss(k, batch, models, config.divergence_spec(), config.psi,
                     config.swap_divergence_direction);
    tape.backward(terms.total);
  } catch (const std::domain_error& error) {
    // Numeric failures (overflow to inf, invalid op domains) surface here;
    // report which student's loss blew up.
    throw std::runtime_error("train_step: numeric failure for student " +
                             std::to_string(k) + " (" + error.what() + ")");
  }
  grads_out = collect_grads(models[k], k);
  return terms;
}

}  // namespace

std::vector<DmlLossTerms> train_step(std::vector<StudentModel>& models,
                                     std::vector<OptimizerState>& opt_states,
                                     const Batch& batch,
                                     const TrainConfig& config, double lr) {
  config.validate();
  if (models.size() != config.cohort_size ||
      opt_states.size() != models.size()) {
    throw std::invalid_argument("train_step: cohort/state size mismatch");
  }
  if (batch.y.empty()) {
    throw std::invalid_argument("train_step: empty batch");
  }

  std::vector<DmlLossTerms> result(models.size());
  if (config.simultaneous_updates) {
    // Ablation mode: every student's gradient is taken at the pre-step
    // weights, then all updates land at once.
    std::vector<std::vector<std::vector<double>>> grads(models.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
      result[k] = student_backward(k, batch, models, config, grads[k]);
    }
    for (std::size_t k = 0; k < models.size(); ++k) {
      apply_update(models[k], opt_states[k], grads[k], config, lr);
    }
  } else {
    // Students update in index order; later students see earlier students'
    // fresh weights within the same step.
    for (std::size_t k = 0; k < models.size(); ++k) {
      std::vector<std::vector<double>> grads;
      result[k] = student_backward(k, batch, models, config, grads);
      apply_update(models[k], opt_states[k], grads, config, lr);
    }
  }
  return result;
}

EvalResult evaluate(const StudentModel& model, const Dataset& dataset,
                    Split split) {
  const std::vector<std::size_t>& indices = dataset.indices(split);
  if (indices.empty()) {
    throw std::invalid_argument("evaluate: empty split");
  }
  const Batch batch = gather_batch(dataset, indices);
  const Tensor log_probs = log_softmax(forward(model, batch.x));
  const double loss = cross_entropy(log_probs, batch.y).item();

  const std::size_t n = batch.y.size();
  const std::size_t m = log_probs.shape()[1];
  auto values = log_probs.values();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    // Strict > keeps the lowest class index on exact ties.
    std::size_t best = 0;
    for (std::size_t j = 1; j < m; ++j) {
      if (values[i * m + j] > values[i * m + best]) {
        best = j;
      }
    }
    if (static_cast<std::int64_t>(best) == batch.y[i]) {
      ++correct;
    }
  }
  return EvalResult{loss, 100.0 * static_cast<double>(correct) /
                              static_cast<double>(n)};
}

std::vector<EpochRecord> train(std::vector<StudentModel>& models,
                               const Dataset& data,
                               const TrainConfig& config) {
  config.validate();
  if (models.size() != config.cohort_size) {
    throw std::invalid_argument(
        "train: models.size() must equal cohort_size");
  }
  if (data.train_indices.empty() || data.test_indices.empty()) {
    throw std::invalid_argument(
        "train: dataset needs non-empty train and test splits");
  }

  std::vector<OptimizerState> opt_states;
  opt_states.reserve(models.size());
  for (const StudentModel& model : models) {
    opt_states.push_back(make_optimizer_state(model));
  }

  double lr = config.lr0;
  std::vector<EpochRecord> records;
  records.reserve(config.epochs * models.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (std::find(config.lr_decay_epochs.begin(), config.lr_decay_epochs.end(),
                  epoch) != config.lr_decay_epochs.end()) {
      lr *= config.lr_decay_factor;
    }
    const std::vector<Batch> epoch_batches = batches(
        data, Split::train, config.batch_size, derive_seed(config.seed, epoch));

    std::vector<double> loss_sums(models.size(), 0.0);
    std::size_t datum_count = 0;
    for (const Batch& batch : epoch_batches) {
      const auto terms = train_step(models, opt_states, batch, config, lr);
      const std::size_t batch_n = batch.y.size();
      datum_count += batch_n;
      for (std::size_t k = 0; k < models.size(); ++k) {
        loss_sums[k] += terms[k].total.item() * static_cast<double>(batch_n);
      }
    }

    for (std::size_t k = 0; k < models.size(); ++k) {
      const EvalResult eval = evaluate(models[k], data, Split::test);
      records.push_back(EpochRecord{
          epoch, k, loss_sums[k] / static_cast<double>(datum_count), eval.loss,
          eval.accuracy});
    }
  }
  return records;
}

void write_epoch_log(const std::vector<EpochRecord>& records,
                     std::ostream& out) {
  out << "epoch\tstudent\ttrain_loss\ttest_loss\ttest_acc\n";
  for (const EpochRecord& r : records) {
    out << r.epoch << '\t' << r.student << '\t' << format_double(r.train_loss)
        << '\t' << format_double(r.test_loss) << '\t'
        << format_double(r.test_accuracy) << '\n';
  }
}

}  // namespace rdml
