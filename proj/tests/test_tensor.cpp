// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdml/rng.hpp"
#include "rdml/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace rdml;
using rdml::test::central_diff;
using rdml::test::rel_err;

namespace {

std::vector<double> random_values(std::size_t n, Rng& rng, double lo,
                                  double hi) {
  std::vector<double> v(n);
  for (double& x : v) {
    x = rng.uniform(lo, hi);
  }
  return v;
}

}  // namespace

TEST_CASE("tensor construction and shape bookkeeping") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rank() == 2);
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 6.0);
  CHECK(Tensor(2.5).item() == 2.5);
  CHECK(Tensor::zeros({4}).at(3) == 0.0);
  CHECK(Tensor::full({2, 2}, 7.0).at(1, 1) == 7.0);

  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({1}, {std::nan("")}), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2}, {1, 2}).item(), std::invalid_argument);
  CHECK_THROWS_AS(Tensor({2}, {1, 2}).at(2), std::invalid_argument);
}

TEST_CASE("matmul identity cases") {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor left = matmul(eye, a);
  const Tensor right = matmul(a, eye);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(left.at(i, j) == a.at(i, j));
      CHECK(right.at(i, j) == a.at(i, j));
    }
  }
  CHECK_THROWS_AS(matmul(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), eye),
                  std::invalid_argument);
}

TEST_CASE("matmul gradient of sum equals ones times transposed operand") {
  Rng rng(11);
  Tensor a({3, 4}, random_values(12, rng, -1, 1));
  Tensor b({4, 2}, random_values(8, rng, -1, 1));
  Tape tape;
  tape.watch(a);
  tape.watch(b);
  Tensor loss = sum(matmul(a, b));
  tape.backward(loss);

  // d sum(AB) / dA = ones(3,2) * B^T
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t l = 0; l < 4; ++l) {
      double expected = 0.0;
      for (std::size_t j = 0; j < 2; ++j) {
        expected += b.at(l, j);
      }
      CHECK(std::abs(a.grad()[i * 4 + l] - expected) < 1e-12);
    }
  }
  // and the finite-difference oracle agrees on every slot of both inputs
  auto objective = [&] { return sum(matmul(a, b)).item(); };
  for (Tensor* t : {&a, &b}) {
    auto grads = t->grad();
    auto values = t->values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      CHECK(rel_err(grads[i], central_diff(objective, &values[i])) < 1e-5);
    }
  }
}

TEST_CASE("elementwise forward identities") {
  CHECK(std::abs(log(exp(Tensor(0.7))).item() - 0.7) < 1e-15);
  CHECK(pow(Tensor({2}, {0.3, 1.7}), 1.0).at(1) == 1.7);
  CHECK(relu(Tensor(-2.0)).item() == 0.0);
  CHECK(relu(Tensor(2.0)).item() == 2.0);
  CHECK(clamp(Tensor(5.0), -1.0, 1.0).item() == 1.0);
  CHECK(neg(Tensor(3.0)).item() == -3.0);
  CHECK(max(Tensor(2.0), Tensor(3.0)).item() == 3.0);
  CHECK((Tensor(2.0) + Tensor(3.0)).item() == 5.0);
  CHECK((Tensor(2.0) - 3.0).item() == -1.0);
  CHECK((4.0 * Tensor(2.5)).item() == 10.0);

  CHECK_THROWS_AS(log(Tensor(0.0)), std::domain_error);
  CHECK_THROWS_AS(log(Tensor(-1.0)), std::domain_error);
  CHECK_THROWS_AS(pow(Tensor(-1.0), 0.5), std::domain_error);
  CHECK_THROWS_AS(clamp(Tensor(0.0), 2.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(add(Tensor({2}, {1, 2}), Tensor({3}, {1, 2, 3})),
                  std::invalid_argument);
  // overflow to inf is rejected, never silently recorded
  CHECK_THROWS_AS(exp(Tensor(1000.0)), std::domain_error);
}

TEST_CASE("pow gradient matches the analytic derivative") {
  Tensor x(0.8);
  Tape tape;
  tape.watch(x);
  tape.backward(pow(x, 2.5));
  const double expected = 2.5 * std::pow(0.8, 1.5);
  CHECK(std::abs(x.grad()[0] - expected) < 1e-12);
  CHECK(std::abs(expected - 1.7888543819998317) < 1e-12);
  auto values = x.values_mut();
  auto objective = [&] { return pow(x, 2.5).item(); };
  CHECK(rel_err(x.grad()[0], central_diff(objective, &values[0])) < 1e-5);
}

TEST_CASE("scalar broadcast keeps the tensor shape on either side") {
  const Tensor v({3}, {1, 2, 3});
  CHECK(mul(v, Tensor(2.0)).shape() == std::vector<std::size_t>{3});
  CHECK(mul(Tensor(2.0), v).shape() == std::vector<std::size_t>{3});
  // two size-1 tensors of different rank: the higher rank wins
  CHECK(mul(Tensor({1}, {5.0}), Tensor(2.0)).rank() == 1);
  CHECK(mul(Tensor(2.0), Tensor({1}, {5.0})).rank() == 1);

  Tensor a({2}, {1.0, 2.0});
  Tensor s(3.0);
  Tape tape;
  tape.watch(a);
  tape.watch(s);
  tape.backward(sum(mul(a, s)));
  CHECK(a.grad()[0] == 3.0);
  CHECK(a.grad()[1] == 3.0);
  CHECK(s.grad()[0] == 3.0);  // scalar side accumulates over the vector
}

TEST_CASE("reductions") {
  CHECK(sum(Tensor({3}, {1, 2, 3})).item() == 6.0);
  const Tensor m({2, 2}, {1, 3, 3, 5});
  const Tensor col_mean = mean(m, 0);
  CHECK(col_mean.at(0) == 2.0);
  CHECK(col_mean.at(1) == 4.0);
  const Tensor row_sum = sum(m, 1);
  CHECK(row_sum.at(0) == 4.0);
  CHECK(row_sum.at(1) == 8.0);
  CHECK_THROWS_AS(sum(m, 2), std::invalid_argument);

  Tensor x({4}, {1, 2, 3, 4});
  Tape tape;
  tape.watch(x);
  tape.backward(mean(x));
  for (double g : x.grad()) {
    CHECK(g == 0.25);
  }
}

TEST_CASE("log_softmax rows behave like normalized log probabilities") {
  const Tensor symmetric = log_softmax(Tensor({1, 2}, {0, 0}));
  CHECK(std::abs(symmetric.at(0, 0) + std::log(2.0)) < 1e-15);
  CHECK(std::abs(symmetric.at(0, 1) + std::log(2.0)) < 1e-15);

  const Tensor base = log_softmax(Tensor({1, 3}, {1, 2, 3}));
  const Tensor shifted = log_softmax(Tensor({1, 3}, {101, 102, 103}));
  double total = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(base.at(0, j) - shifted.at(0, j)) < 1e-12);
    total += std::exp(base.at(0, j));
  }
  CHECK(std::abs(total - 1.0) < 1e-12);

  // extreme logits stay finite thanks to the max shift
  CHECK(std::isfinite(log_softmax(Tensor({1, 2}, {1e8, -1e8})).at(0, 0)));
}

TEST_CASE("logsumexp_rows matches log of summed exponentials") {
  const Tensor t({2, 3}, {0.1, 0.7, -0.4, 2.0, 2.0, 2.0});
  const Tensor lse = logsumexp_rows(t);
  CHECK(std::abs(lse.at(0) - std::log(std::exp(0.1) + std::exp(0.7) +
                                      std::exp(-0.4))) < 1e-14);
  CHECK(std::abs(lse.at(1) - (2.0 + std::log(3.0))) < 1e-14);
}

TEST_CASE("repeat and gather builders") {
  const Tensor row({2}, {1.5, -0.5});
  const Tensor tiled = repeat_rows(row, 3);
  CHECK(tiled.shape() == std::vector<std::size_t>{3, 2});
  CHECK(tiled.at(2, 0) == 1.5);

  const Tensor col({2}, {3.0, 4.0});
  const Tensor cols = repeat_cols(col, 3);
  CHECK(cols.shape() == std::vector<std::size_t>{2, 3});
  CHECK(cols.at(1, 2) == 4.0);

  const Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor picked = gather_rows(m, {2, 0});
  CHECK(picked.at(0) == 3.0);
  CHECK(picked.at(1) == 4.0);
  CHECK_THROWS_AS(gather_rows(m, {0, 3}), std::invalid_argument);
  CHECK_THROWS_AS(gather_rows(m, {0}), std::invalid_argument);
}

TEST_CASE("backward basics: ones for sum, analytic for sum of squares") {
  Tensor x({2, 2}, {1, 2, 3, 4});
  {
    Tape tape;
    tape.watch(x);
    tape.backward(sum(x));
    for (double g : x.grad()) {
      CHECK(g == 1.0);
    }
  }
  Tensor y({2}, {1, 2});
  {
    Tape tape;
    tape.watch(y);
    tape.backward(sum(mul(y, y)));
    CHECK(y.grad()[0] == 2.0);
    CHECK(y.grad()[1] == 4.0);
  }
}

TEST_CASE("gradients accumulate across node reuse") {
  // f(x) = sum(x * x) + sum(x) uses x three times in one graph.
  Tensor x({3}, {0.5, -1.5, 2.0});
  Tape tape;
  tape.watch(x);
  tape.backward(add(sum(mul(x, x)), sum(x)));
  // duplicated-input equivalent: separate tensors with the same values
  Tensor x1({3}, {0.5, -1.5, 2.0});
  Tensor x2({3}, {0.5, -1.5, 2.0});
  Tensor x3({3}, {0.5, -1.5, 2.0});
  Tape tape2;
  tape2.watch(x1);
  tape2.watch(x2);
  tape2.watch(x3);
  tape2.backward(add(sum(mul(x1, x2)), sum(x3)));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(x.grad()[i] -
                   (x1.grad()[i] + x2.grad()[i] + x3.grad()[i])) < 1e-15);
  }
}

TEST_CASE("max ties route the gradient to the first argument") {
  Tensor a({2}, {1.0, 5.0});
  Tensor b({2}, {1.0, 2.0});
  Tape tape;
  tape.watch(a);
  tape.watch(b);
  tape.backward(sum(max(a, b)));
  CHECK(a.grad()[0] == 1.0);  // tie at 1.0 goes to a
  CHECK(b.grad()[0] == 0.0);
  CHECK(a.grad()[1] == 1.0);
  CHECK(b.grad()[1] == 0.0);
}

TEST_CASE("clamp passes gradient only inside the closed interval") {
  Tensor x({3}, {-2.0, 0.5, 2.0});
  Tape tape;
  tape.watch(x);
  tape.backward(sum(clamp(x, -1.0, 1.0)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("tape protocol errors") {
  Tensor x({2}, {1, 2});
  Tape tape;
  tape.watch(x);
  Tensor loss = sum(x);
  tape.backward(loss);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);

  Tape tape2;
  Tensor y({2}, {1, 2});
  tape2.watch(y);
  CHECK_THROWS_AS(tape2.backward(y), std::invalid_argument);  // non-scalar

  Tape tape3;
  CHECK_THROWS_AS(tape3.backward(Tensor(1.0)), std::logic_error);  // untracked

  // in-place mutation is rejected while a live tape holds the tensor
  Tape tape4;
  Tensor z({2}, {1, 2});
  tape4.watch(z);
  CHECK_THROWS_AS(z.values_mut(), std::logic_error);
  tape4.backward(sum(z));
  CHECK(z.values_mut().size() == 2);  // allowed again once consumed
}

TEST_CASE("tensors cannot mix two live tapes") {
  Tape tape_a;
  Tape tape_b;
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 4});
  tape_a.watch(a);
  tape_b.watch(b);
  CHECK_THROWS_AS(add(a, b), std::logic_error);
  CHECK_THROWS_AS(tape_b.watch(a), std::logic_error);
}

TEST_CASE("leaves from a finished tape degrade to constants") {
  Tensor w({2}, {1.0, 2.0});
  Tape tape;
  tape.watch(w);
  tape.backward(sum(mul(w, w)));

  // a new graph using w without re-watching treats it as data
  Tape tape2;
  Tensor v({2}, {1.0, 1.0});
  tape2.watch(v);
  tape2.backward(sum(mul(v, w)));
  CHECK(v.grad()[0] == 1.0);
  CHECK(v.grad()[1] == 2.0);
  CHECK(w.grad()[0] == 2.0);  // untouched gradient from the first graph
}

TEST_CASE("composed graph gradients match finite differences") {
  Rng rng(29);
  Tensor x({2, 3}, random_values(6, rng, 0.2, 1.5));
  Tensor w({3, 4}, random_values(12, rng, -0.8, 0.8));
  Tensor b({4}, random_values(4, rng, -0.3, 0.3));
  Tensor c({2, 4}, random_values(8, rng, 0.4, 1.2));

  auto build = [&] {
    Tensor h = add(matmul(x, w), repeat_rows(b, 2));
    Tensor soft = log_softmax(h);
    Tensor mixed = add(mul(exp(soft), c), pow(clamp(h, -0.9, 0.9), 2.0));
    return mean(add(mul(mixed, mixed), relu(h))).item();
  };

  Tape tape;
  tape.watch(x);
  tape.watch(w);
  tape.watch(b);
  tape.watch(c);
  Tensor h = add(matmul(x, w), repeat_rows(b, 2));
  Tensor soft = log_softmax(h);
  Tensor mixed = add(mul(exp(soft), c), pow(clamp(h, -0.9, 0.9), 2.0));
  tape.backward(mean(add(mul(mixed, mixed), relu(h))));

  for (Tensor* t : {&x, &w, &b, &c}) {
    auto grads = t->grad();
    auto values = t->values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      CHECK(rel_err(grads[i], central_diff(build, &values[i])) < 1e-4);
    }
  }
}

TEST_CASE("logsumexp and gather gradients match finite differences") {
  Rng rng(31);
  Tensor t({3, 4}, random_values(12, rng, -1.0, 1.0));
  const std::vector<std::int64_t> index{2, 0, 3};
  auto build = [&] {
    return sum(add(logsumexp_rows(t), gather_rows(t, index))).item();
  };
  Tape tape;
  tape.watch(t);
  tape.backward(sum(add(logsumexp_rows(t), gather_rows(t, index))));
  auto grads = t.grad();
  auto values = t.values_mut();
  for (std::size_t i = 0; i < values.size(); ++i) {
    CHECK(rel_err(grads[i], central_diff(build, &values[i])) < 1e-4);
  }
}

TEST_CASE("detached copies leave the graph") {
  Tensor x({2}, {1.0, 2.0});
  Tape tape;
  tape.watch(x);
  Tensor doubled = mul(x, Tensor(2.0));
  Tensor frozen = doubled.detached();
  CHECK_FALSE(frozen.requires_grad());
  tape.backward(sum(add(doubled, frozen)));
  // only the live path contributes
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 2.0);
}
