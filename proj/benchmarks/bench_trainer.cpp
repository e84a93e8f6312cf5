// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "rdml/dataset.hpp"
#include "rdml/model.hpp"
#include "rdml/trainer.hpp"

namespace {

rdml::TrainConfig bench_config(std::size_t cohort) {
  rdml::TrainConfig config;
  config.cohort_size = cohort;
  config.alpha = 1.5;
  config.psi = 1.0;
  config.lr0 = 0.1;
  config.momentum = 0.9;
  config.nesterov = true;
  config.weight_decay = 1e-4;
  config.epochs = 1;
  config.batch_size = 32;
  config.seed = 5;
  return config;
}

std::vector<rdml::StudentModel> make_cohort(std::size_t cohort,
                                            const std::vector<std::size_t>& sizes) {
  std::vector<rdml::StudentModel> models;
  for (std::size_t k = 0; k < cohort; ++k) {
    models.push_back(rdml::init_student(sizes, 100 + k));
  }
  return models;
}

void bench_dml_loss(benchmark::State& state) {
  const std::size_t cohort = static_cast<std::size_t>(state.range(0));
  std::vector<rdml::StudentModel> models =
      make_cohort(cohort, {10, 32, 5});
  const rdml::Dataset data = rdml::make_blobs(64, 10, 5, 2.0, 9);
  const rdml::Batch batch =
      rdml::gather_batch(data, data.train_indices);
  const rdml::TrainConfig config = bench_config(cohort);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdml::dml_loss(0, batch, models,
                                            config.divergence_spec(),
                                            config.psi));
  }
}
BENCHMARK(bench_dml_loss)->Arg(2)->Arg(4);

void bench_train_step(benchmark::State& state) {
  const std::size_t cohort = static_cast<std::size_t>(state.range(0));
  std::vector<rdml::StudentModel> models =
      make_cohort(cohort, {10, 32, 5});
  std::vector<rdml::OptimizerState> opt_states;
  for (const rdml::StudentModel& model : models) {
    opt_states.push_back(rdml::make_optimizer_state(model));
  }
  const rdml::Dataset data = rdml::make_blobs(64, 10, 5, 2.0, 9);
  const std::vector<rdml::Batch> all =
      rdml::batches(data, rdml::Split::train, 32, 1);
  const rdml::TrainConfig config = bench_config(cohort);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rdml::train_step(models, opt_states, all[0], config, 0.01));
  }
}
BENCHMARK(bench_train_step)->Arg(2)->Arg(4);

void bench_epoch(benchmark::State& state) {
  const rdml::Dataset data = rdml::make_blobs(512, 10, 5, 2.0, 9);
  for (auto _ : state) {
    std::vector<rdml::StudentModel> models = make_cohort(2, {10, 32, 5});
    rdml::TrainConfig config = bench_config(2);
    benchmark::DoNotOptimize(rdml::train(models, data, config));
  }
}
BENCHMARK(bench_epoch);

void bench_evaluate(benchmark::State& state) {
  const rdml::Dataset data = rdml::make_blobs(2000, 10, 5, 2.0, 9);
  const rdml::StudentModel model = rdml::init_student({10, 32, 5}, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rdml::evaluate(model, data, rdml::Split::test));
  }
}
BENCHMARK(bench_evaluate);

}  // namespace

BENCHMARK_MAIN();
