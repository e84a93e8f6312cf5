// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdml/divergence.hpp"
#include "rdml/model.hpp"
#include "rdml/rng.hpp"
#include "rdml/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace rdml;
using rdml::test::central_diff;
using rdml::test::rel_err;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("initialization is deterministic and seed-sensitive") {
  const StudentModel a = init_student({4, 8, 3}, 42);
  const StudentModel b = init_student({4, 8, 3}, 42);
  const StudentModel c = init_student({4, 8, 3}, 43);

  REQUIRE(a.layer_count() == 2);
  CHECK(a.input_size() == 4);
  CHECK(a.class_count() == 3);

  bool any_difference = false;
  for (std::size_t l = 0; l < a.layer_count(); ++l) {
    auto av = a.weights[l].values();
    auto bv = b.weights[l].values();
    auto cv = c.weights[l].values();
    for (std::size_t i = 0; i < av.size(); ++i) {
      CHECK(av[i] == bv[i]);
      any_difference = any_difference || av[i] != cv[i];
    }
    for (double bias : a.biases[l].values()) {
      CHECK(bias == 0.0);
    }
  }
  CHECK(any_difference);
}

TEST_CASE("initial weights respect the fan-based uniform bound") {
  const StudentModel m = init_student({10, 32, 5}, 7);
  const double bound0 = std::sqrt(6.0 / (10 + 32));
  const double bound1 = std::sqrt(6.0 / (32 + 5));
  for (double w : m.weights[0].values()) {
    CHECK(std::abs(w) <= bound0);
  }
  for (double w : m.weights[1].values()) {
    CHECK(std::abs(w) <= bound1);
  }
  // the draw actually spreads over the interval rather than collapsing
  double lo = 1e300;
  double hi = -1e300;
  for (double w : m.weights[0].values()) {
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  CHECK(lo < -0.5 * bound0);
  CHECK(hi > 0.5 * bound0);
}

TEST_CASE("invalid layer shapes are rejected") {
  CHECK_THROWS_AS(init_student({}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_student({4}, 1), std::invalid_argument);
  CHECK_THROWS_AS(init_student({4, 0, 2}, 1), std::invalid_argument);
}

TEST_CASE("parameter ordering and count") {
  StudentModel m = init_student({3, 5, 2}, 9);
  const std::vector<Tensor*> params = parameters(m);
  REQUIRE(params.size() == 4);
  CHECK(params[0] == &m.weights[0]);
  CHECK(params[1] == &m.biases[0]);
  CHECK(params[2] == &m.weights[1]);
  CHECK(params[3] == &m.biases[1]);
  CHECK(parameter_count(m) == (3 + 1) * 5 + (5 + 1) * 2);
}

TEST_CASE("zero weights produce uniform class probabilities") {
  StudentModel m = init_student({4, 3}, 5);
  for (double& w : m.weights[0].values_mut()) {
    w = 0.0;
  }
  const Tensor x({2, 4}, {1, -2, 3, 4, 0, 0, 1, -1});
  const CategoricalBatch probs =
      CategoricalBatch::from_logits(forward(m, x));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(probs.probs.at(i, j) - 1.0 / 3.0) < 1e-15);
    }
  }
}

TEST_CASE("single-layer model is an affine map") {
  StudentModel m = init_student({2, 2}, 3);
  {
    auto w = m.weights[0].values_mut();
    w[0] = 1.0;  // W = [[1, 2], [3, 4]] row-major [in, out]
    w[1] = 2.0;
    w[2] = 3.0;
    w[3] = 4.0;
    auto b = m.biases[0].values_mut();
    b[0] = 0.5;
    b[1] = -0.5;
  }
  const Tensor logits = forward(m, Tensor({1, 2}, {1.0, 1.0}));
  CHECK(logits.at(0, 0) == 1.0 + 3.0 + 0.5);
  CHECK(logits.at(0, 1) == 2.0 + 4.0 - 0.5);
}

TEST_CASE("hidden layers pass through relu") {
  StudentModel m = init_student({1, 1, 1}, 3);
  {
    auto w0 = m.weights[0].values_mut();
    w0[0] = 1.0;
    auto w1 = m.weights[1].values_mut();
    w1[0] = 1.0;
  }
  // negative pre-activation is squashed to zero before the output layer
  CHECK(forward(m, Tensor({1, 1}, {-3.0})).at(0, 0) == 0.0);
  CHECK(forward(m, Tensor({1, 1}, {3.0})).at(0, 0) == 3.0);
}

TEST_CASE("predicted probabilities are normalized") {
  const StudentModel m = init_student({6, 12, 4}, 77);
  Rng rng(5);
  std::vector<double> x(3 * 6);
  for (double& v : x) {
    v = rng.normal();
  }
  const CategoricalBatch probs =
      CategoricalBatch::from_logits(forward(m, Tensor({3, 6}, x)));
  for (std::size_t i = 0; i < 3; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      total += probs.probs.at(i, j);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("forward rejects input with the wrong feature width") {
  const StudentModel m = init_student({3, 2}, 1);
  CHECK_THROWS_AS(forward(m, Tensor({1, 4}, {1, 2, 3, 4})),
                  std::invalid_argument);
}

TEST_CASE("loss gradients through the network match finite differences") {
  StudentModel m = init_student({3, 4, 2}, 13);
  Rng rng(67);
  std::vector<double> x(4 * 3);
  for (double& v : x) {
    v = rng.normal();
  }
  const Tensor inputs({4, 3}, x);
  const std::vector<std::int64_t> labels{0, 1, 1, 0};

  auto objective = [&] {
    return cross_entropy(log_softmax(forward(m, inputs)), labels).item();
  };

  Tape tape;
  for (Tensor* p : parameters(m)) {
    tape.watch(*p);
  }
  tape.backward(cross_entropy(log_softmax(forward(m, inputs)), labels));

  for (Tensor* p : parameters(m)) {
    auto grads = p->grad();
    auto values = p->values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      CHECK(rel_err(grads[i], central_diff(objective, &values[i])) < 1e-4);
    }
  }
}

TEST_CASE("checkpoints round-trip bitwise") {
  const StudentModel original = init_student({5, 7, 3}, 2024);
  const auto path = temp_file("rdml_test_ckpt_roundtrip.ckpt");
  save_checkpoint(original, path.string());
  const StudentModel loaded = load_checkpoint(path.string());

  CHECK(loaded.layer_sizes == original.layer_sizes);
  CHECK(loaded.seed == original.seed);
  REQUIRE(loaded.layer_count() == original.layer_count());
  for (std::size_t l = 0; l < original.layer_count(); ++l) {
    auto ow = original.weights[l].values();
    auto lw = loaded.weights[l].values();
    REQUIRE(ow.size() == lw.size());
    for (std::size_t i = 0; i < ow.size(); ++i) {
      CHECK(ow[i] == lw[i]);
    }
    auto ob = original.biases[l].values();
    auto lb = loaded.biases[l].values();
    for (std::size_t i = 0; i < ob.size(); ++i) {
      CHECK(ob[i] == lb[i]);
    }
  }

  // saving the loaded model again produces identical bytes
  const auto path2 = temp_file("rdml_test_ckpt_roundtrip2.ckpt");
  save_checkpoint(loaded, path2.string());
  std::ifstream f1(path, std::ios::binary);
  std::ifstream f2(path2, std::ios::binary);
  const std::string bytes1((std::istreambuf_iterator<char>(f1)),
                           std::istreambuf_iterator<char>());
  const std::string bytes2((std::istreambuf_iterator<char>(f2)),
                           std::istreambuf_iterator<char>());
  CHECK(bytes1 == bytes2);
  CHECK(!bytes1.empty());
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("checkpoint loader rejects malformed files") {
  const auto missing = temp_file("rdml_test_ckpt_missing.ckpt");
  std::filesystem::remove(missing);
  CHECK_THROWS_AS(load_checkpoint(missing.string()), std::runtime_error);

  const auto bad_magic = temp_file("rdml_test_ckpt_bad_magic.ckpt");
  {
    std::ofstream out(bad_magic);
    out << "not-a-checkpoint\n";
  }
  CHECK_THROWS_AS(load_checkpoint(bad_magic.string()), std::runtime_error);
  std::filesystem::remove(bad_magic);

  const auto truncated = temp_file("rdml_test_ckpt_truncated.ckpt");
  {
    const StudentModel m = init_student({2, 2}, 1);
    save_checkpoint(m, truncated.string());
    std::ifstream in(truncated);
    std::string body((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();
    std::ofstream out(truncated, std::ios::trunc);
    out << body.substr(0, body.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(truncated.string()), std::runtime_error);
  std::filesystem::remove(truncated);
}
