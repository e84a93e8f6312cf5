// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "rdml/rng.hpp"
#include "rdml/tensor.hpp"

namespace {

rdml::Tensor random_tensor(std::size_t rows, std::size_t cols,
                           std::uint64_t seed) {
  rdml::Rng rng(seed);
  std::vector<double> values(rows * cols);
  for (double& v : values) {
    v = rng.uniform(-1.0, 1.0);
  }
  return rdml::Tensor({rows, cols}, std::move(values));
}

void bench_matmul_forward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const rdml::Tensor a = random_tensor(n, n, 1);
  const rdml::Tensor b = random_tensor(n, n, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdml::matmul(a, b));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(bench_matmul_forward)->Arg(16)->Arg(64)->Arg(128);

void bench_matmul_backward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  rdml::Tensor a = random_tensor(n, n, 1);
  const rdml::Tensor b = random_tensor(n, n, 2);
  for (auto _ : state) {
    rdml::Tape tape;
    tape.watch(a);
    tape.backward(rdml::sum(rdml::matmul(a, b)));
    benchmark::DoNotOptimize(a.grad().data());
  }
}
BENCHMARK(bench_matmul_backward)->Arg(16)->Arg(64);

void bench_log_softmax(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  const rdml::Tensor logits = random_tensor(rows, 10, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdml::log_softmax(logits));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(rows * 10));
}
BENCHMARK(bench_log_softmax)->Arg(32)->Arg(1024);

void bench_elementwise_chain(benchmark::State& state) {
  const std::size_t rows = static_cast<std::size_t>(state.range(0));
  rdml::Tensor x = random_tensor(rows, 32, 4);
  for (auto _ : state) {
    rdml::Tape tape;
    tape.watch(x);
    const rdml::Tensor y =
        rdml::mean(rdml::relu(rdml::exp(rdml::mul(x, rdml::Tensor(0.01)))));
    tape.backward(y);
    benchmark::DoNotOptimize(x.grad().data());
  }
}
BENCHMARK(bench_elementwise_chain)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
