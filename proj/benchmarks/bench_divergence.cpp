// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "rdml/divergence.hpp"
#include "rdml/rng.hpp"
#include "rdml/tensor.hpp"

namespace {

rdml::CategoricalBatch random_batch(std::size_t rows, std::size_t classes,
                                    std::uint64_t seed) {
  rdml::Rng rng(seed);
  std::vector<double> values(rows * classes);
  for (std::size_t i = 0; i < rows; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      values[i * classes + j] = rng.uniform(1e-4, 1.0);
      total += values[i * classes + j];
    }
    for (std::size_t j = 0; j < classes; ++j) {
      values[i * classes + j] /= total;
    }
  }
  return rdml::CategoricalBatch::from_probs(
      rdml::Tensor({rows, classes}, std::move(values)));
}

rdml::DivergenceSpec spec_for(double alpha) {
  rdml::DivergenceSpec spec;
  spec.alpha = alpha;
  return spec;
}

void bench_renyi(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const std::size_t classes = static_cast<std::size_t>(state.range(1));
  const rdml::CategoricalBatch p = random_batch(rows, classes, 1);
  const rdml::CategoricalBatch q = random_batch(rows, classes, 2);
  const rdml::DivergenceSpec spec = spec_for(2.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdml::renyi(p, q, spec));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows));
}
BENCHMARK(bench_renyi)->Args({32, 2})->Args({1024, 10});

void bench_kl(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const rdml::CategoricalBatch p = random_batch(rows, 10, 1);
  const rdml::CategoricalBatch q = random_batch(rows, 10, 2);
  const rdml::DivergenceSpec spec = spec_for(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdml::kl(p, q, spec));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows));
}
BENCHMARK(bench_kl)->Arg(32)->Arg(1024);

void bench_renyi_gradient(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  rdml::Rng rng(7);
  std::vector<double> raw(rows * 10);
  for (double& v : raw) {
    v = rng.uniform(-2.0, 2.0);
  }
  rdml::Tensor logits({rows, 10}, std::move(raw));
  const rdml::CategoricalBatch q = random_batch(rows, 10, 2);
  const rdml::DivergenceSpec spec = spec_for(2.0);
  for (auto _ : state) {
    rdml::Tape tape;
    tape.watch(logits);
    const rdml::CategoricalBatch p = rdml::CategoricalBatch::from_logits(logits);
    tape.backward(rdml::mean(rdml::renyi(p, q, spec)));
    benchmark::DoNotOptimize(logits.grad().data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows));
}
BENCHMARK(bench_renyi_gradient)->Arg(32)->Arg(256);

void bench_curve(benchmark::State& state) {
  rdml::CurveSpec spec;
  spec.a = 0.4;
  spec.alphas = {0.5, 1.0, 2.0, 5.0};
  spec.grid_points = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdml::divergence_curve(spec));
  }
}
BENCHMARK(bench_curve)->Arg(99)->Arg(999);

}  // namespace

BENCHMARK_MAIN();
