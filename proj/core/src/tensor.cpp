// SPDX-License-Identifier: Apache-2.0
#include "rdml/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace rdml {
namespace detail {

using NodePtr = std::shared_ptr<TensorNode>;

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

void ensure_finite(const std::vector<double>& values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::domain_error(std::string(op) + ": non-finite value in result");
    }
  }
}

[[noreturn]] void shape_error(const char* op) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

struct OpKernel {
  static const NodePtr& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }

  // A node is tracked only while its tape is live and not yet consumed;
  // leaves left over from a finished step degrade to constants.
  static std::shared_ptr<TapeState> live_tape(const NodePtr& n) {
    if (!n->requires_grad) {
      return nullptr;
    }
    auto tape = n->tape.lock();
    if (!tape || tape->consumed) {
      return nullptr;
    }
    return tape;
  }

  static std::shared_ptr<TapeState> common_tape(
      std::initializer_list<const Tensor*> inputs, const char* op) {
    std::shared_ptr<TapeState> tape;
    for (const Tensor* t : inputs) {
      auto candidate = live_tape(t->node_);
      if (!candidate) {
        continue;
      }
      if (tape && tape != candidate) {
        throw std::logic_error(std::string(op) +
                               ": inputs recorded on different tapes");
      }
      tape = candidate;
    }
    return tape;
  }

  static NodePtr make_output(std::vector<std::size_t> shape,
                             std::vector<double> values,
                             const std::shared_ptr<TapeState>& tape,
                             const char* op) {
    ensure_finite(values, op);
    auto out = std::make_shared<TensorNode>();
    out->shape = std::move(shape);
    out->values = std::move(values);
    if (tape) {
      out->requires_grad = true;
      out->grad.assign(out->values.size(), 0.0);
      out->tape = tape;
    }
    return out;
  }

  static void record(const std::shared_ptr<TapeState>& tape,
                     std::function<void()> step) {
    tape->steps.push_back(std::move(step));
  }

  static bool tracked(const NodePtr& n,
                      const std::shared_ptr<TapeState>& tape) {
    return n->requires_grad && n->tape.lock() == tape;
  }
};

namespace {

using Kernel = OpKernel;

// fwd(a, b) -> value; dfa/dfb(g, a, b) -> gradient contribution to that input.
template <typename Fwd, typename Dfa, typename Dfb>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b,
                          Fwd fwd, Dfa dfa, Dfb dfb) {
  const NodePtr& an = Kernel::node(a);
  const NodePtr& bn = Kernel::node(b);
  const bool a_scalar = an->values.size() == 1;
  const bool b_scalar = bn->values.size() == 1;
  std::vector<std::size_t> out_shape;
  if (an->shape == bn->shape) {
    out_shape = an->shape;
  } else if (a_scalar && b_scalar) {
    // Two size-1 tensors of different rank; keep the higher-rank shape.
    out_shape =
        an->shape.size() >= bn->shape.size() ? an->shape : bn->shape;
  } else if (a_scalar) {
    out_shape = bn->shape;
  } else if (b_scalar) {
    out_shape = an->shape;
  } else {
    shape_error(op);
  }

  const std::size_t n = shape_product(out_shape);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = fwd(an->values[a_scalar ? 0 : i], bn->values[b_scalar ? 0 : i]);
  }

  auto tape = Kernel::common_tape({&a, &b}, op);
  NodePtr out = Kernel::make_output(std::move(out_shape), std::move(values), tape, op);
  if (tape) {
    const bool track_a = Kernel::tracked(an, tape);
    const bool track_b = Kernel::tracked(bn, tape);
    Kernel::record(tape, [an, bn, out, a_scalar, b_scalar, track_a, track_b,
                          dfa, dfb, n] {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = out->grad[i];
        const double av = an->values[a_scalar ? 0 : i];
        const double bv = bn->values[b_scalar ? 0 : i];
        if (track_a) {
          an->grad[a_scalar ? 0 : i] += dfa(g, av, bv);
        }
        if (track_b) {
          bn->grad[b_scalar ? 0 : i] += dfb(g, av, bv);
        }
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

// dfn(g, x, y) -> gradient contribution, with y the forward output value.
template <typename Fwd, typename Dfn>
Tensor unary_elementwise(const char* op, const Tensor& t, Fwd fwd, Dfn dfn) {
  const NodePtr& tn = Kernel::node(t);
  const std::size_t n = tn->values.size();
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = fwd(tn->values[i]);
  }
  auto tape = Kernel::common_tape({&t}, op);
  NodePtr out = Kernel::make_output(tn->shape, std::move(values), tape, op);
  if (tape) {
    Kernel::record(tape, [tn, out, dfn, n] {
      for (std::size_t i = 0; i < n; ++i) {
        tn->grad[i] += dfn(out->grad[i], tn->values[i], out->values[i]);
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

}  // namespace
}  // namespace detail

using detail::Kernel;
using detail::NodePtr;

Tensor::Tensor() : Tensor(0.0) {}

Tensor::Tensor(double scalar) {
  node_ = std::make_shared<detail::TensorNode>();
  node_->values = {scalar};
  if (!std::isfinite(scalar)) {
    throw std::invalid_argument("Tensor: non-finite scalar");
  }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values) {
  std::size_t expected = 1;
  for (std::size_t d : shape) {
    expected *= d;
  }
  if (expected != values.size()) {
    throw std::invalid_argument("Tensor: shape does not match data length");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("Tensor: non-finite value");
    }
  }
  node_ = std::make_shared<detail::TensorNode>();
  node_->shape = std::move(shape);
  node_->values = std::move(values);
}

Tensor::Tensor(std::shared_ptr<detail::TensorNode> node)
    : node_(std::move(node)) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    n *= d;
  }
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

std::span<double> Tensor::values_mut() {
  if (Kernel::live_tape(node_)) {
    throw std::logic_error("Tensor: in-place mutation while on a live tape");
  }
  return node_->values;
}

std::span<const double> Tensor::grad() const {
  if (!node_->requires_grad || node_->grad.size() != node_->values.size()) {
    throw std::logic_error("Tensor: no gradient buffer");
  }
  return node_->grad;
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("Tensor: item() on non-scalar");
  }
  return node_->values[0];
}

double Tensor::at(std::size_t i) const {
  if (rank() != 1 || i >= node_->shape[0]) {
    throw std::invalid_argument("Tensor: bad rank-1 index");
  }
  return node_->values[i];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2 || i >= node_->shape[0] || j >= node_->shape[1]) {
    throw std::invalid_argument("Tensor: bad rank-2 index");
  }
  return node_->values[i * node_->shape[1] + j];
}

Tensor Tensor::detached() const {
  return Tensor(node_->shape, node_->values);
}

Tape::Tape() : state_(std::make_shared<detail::TapeState>()) {}

void Tape::watch(Tensor& tensor) {
  if (state_->consumed) {
    throw std::logic_error("Tape: watch after backward");
  }
  NodePtr n = Kernel::node(tensor);
  auto current = n->tape.lock();
  if (current && current != state_ && !current->consumed) {
    throw std::logic_error("Tape: tensor already watched by another live tape");
  }
  n->requires_grad = true;
  n->grad.assign(n->values.size(), 0.0);
  n->tape = state_;
}

void Tape::backward(const Tensor& root) {
  if (state_->consumed) {
    throw std::logic_error("Tape: backward already run");
  }
  const NodePtr& n = Kernel::node(root);
  if (n->values.size() != 1) {
    throw std::invalid_argument("Tape: backward root must be a scalar");
  }
  if (!n->requires_grad || n->tape.lock() != state_) {
    throw std::logic_error("Tape: root is not recorded on this tape");
  }
  n->grad[0] = 1.0;
  for (auto it = state_->steps.rbegin(); it != state_->steps.rend(); ++it) {
    (*it)();
  }
  state_->consumed = true;
}

Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; },
      [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; },
      [](double g, double x, double) { return g * x; });
}

// Ties send the gradient to the first argument.
Tensor max(const Tensor& a, const Tensor& b) {
  return detail::binary_elementwise(
      "max", a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double g, double x, double y) { return x >= y ? g : 0.0; },
      [](double g, double x, double y) { return x >= y ? 0.0 : g; });
}

Tensor log(const Tensor& t) {
  for (double v : Kernel::node(t)->values) {
    if (v <= 0.0) {
      throw std::domain_error("log: non-positive input");
    }
  }
  return detail::unary_elementwise(
      "log", t, [](double x) { return std::log(x); },
      [](double g, double x, double) { return g / x; });
}

Tensor exp(const Tensor& t) {
  return detail::unary_elementwise(
      "exp", t, [](double x) { return std::exp(x); },
      [](double g, double, double y) { return g * y; });
}

Tensor pow(const Tensor& t, double exponent) {
  const bool integral = exponent == std::floor(exponent);
  for (double v : Kernel::node(t)->values) {
    if (v < 0.0 && !integral) {
      throw std::domain_error("pow: negative base with fractional exponent");
    }
  }
  return detail::unary_elementwise(
      "pow", t, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double g, double x, double) {
        return g * exponent * std::pow(x, exponent - 1.0);
      });
}

Tensor relu(const Tensor& t) {
  return detail::unary_elementwise(
      "relu", t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

// Gradient passes on the closed interval [lo, hi].
Tensor clamp(const Tensor& t, double lo, double hi) {
  if (!(lo <= hi)) {
    throw std::invalid_argument("clamp: lo > hi");
  }
  return detail::unary_elementwise(
      "clamp", t,
      [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double g, double x, double) {
        return (x >= lo && x <= hi) ? g : 0.0;
      });
}

Tensor neg(const Tensor& t) {
  return detail::unary_elementwise(
      "neg", t, [](double x) { return -x; },
      [](double g, double, double) { return -g; });
}

namespace {

Tensor reduce_all(const char* op, const Tensor& t, bool take_mean) {
  const NodePtr& tn = Kernel::node(t);
  const std::size_t n = tn->values.size();
  double acc = 0.0;
  for (double v : tn->values) {
    acc += v;
  }
  const double denom = take_mean ? static_cast<double>(n) : 1.0;
  auto tape = Kernel::common_tape({&t}, op);
  NodePtr out = Kernel::make_output({}, {acc / denom}, tape, op);
  if (tape) {
    Kernel::record(tape, [tn, out, denom, n] {
      const double g = out->grad[0] / denom;
      for (std::size_t i = 0; i < n; ++i) {
        tn->grad[i] += g;
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

Tensor reduce_axis(const char* op, const Tensor& t, std::size_t axis,
                   bool take_mean) {
  const NodePtr& tn = Kernel::node(t);
  if (axis >= tn->shape.size()) {
    throw std::invalid_argument(std::string(op) + ": axis out of range");
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) {
    outer *= tn->shape[i];
  }
  for (std::size_t i = axis + 1; i < tn->shape.size(); ++i) {
    inner *= tn->shape[i];
  }
  const std::size_t n = tn->shape[axis];
  const double denom = take_mean ? static_cast<double>(n) : 1.0;

  std::vector<std::size_t> out_shape;
  for (std::size_t i = 0; i < tn->shape.size(); ++i) {
    if (i != axis) {
      out_shape.push_back(tn->shape[i]);
    }
  }
  std::vector<double> values(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t base = (o * n + k) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        values[o * inner + i] += tn->values[base + i];
      }
    }
  }
  if (take_mean) {
    for (double& v : values) {
      v /= denom;
    }
  }

  auto tape = Kernel::common_tape({&t}, op);
  NodePtr out = Kernel::make_output(std::move(out_shape), std::move(values), tape, op);
  if (tape) {
    Kernel::record(tape, [tn, out, outer, inner, n, denom] {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t base = (o * n + k) * inner;
          for (std::size_t i = 0; i < inner; ++i) {
            tn->grad[base + i] += out->grad[o * inner + i] / denom;
          }
        }
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

}  // namespace

Tensor sum(const Tensor& t) { return reduce_all("sum", t, false); }
Tensor sum(const Tensor& t, std::size_t axis) {
  return reduce_axis("sum", t, axis, false);
}
Tensor mean(const Tensor& t) { return reduce_all("mean", t, true); }
Tensor mean(const Tensor& t, std::size_t axis) {
  return reduce_axis("mean", t, axis, true);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const NodePtr& an = Kernel::node(a);
  const NodePtr& bn = Kernel::node(b);
  if (an->shape.size() != 2 || bn->shape.size() != 2 ||
      an->shape[1] != bn->shape[0]) {
    detail::shape_error("matmul");
  }
  const std::size_t m = an->shape[0];
  const std::size_t k = an->shape[1];
  const std::size_t n = bn->shape[1];

  std::vector<double> values(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t l = 0; l < k; ++l) {
      const double av = an->values[i * k + l];
      for (std::size_t j = 0; j < n; ++j) {
        values[i * n + j] += av * bn->values[l * n + j];
      }
    }
  }

  auto tape = Kernel::common_tape({&a, &b}, "matmul");
  NodePtr out = Kernel::make_output({m, n}, std::move(values), tape, "matmul");
  if (tape) {
    const bool track_a = Kernel::tracked(an, tape);
    const bool track_b = Kernel::tracked(bn, tape);
    Kernel::record(tape, [an, bn, out, m, k, n, track_a, track_b] {
      if (track_a) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t l = 0; l < k; ++l) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              acc += out->grad[i * n + j] * bn->values[l * n + j];
            }
            an->grad[i * k + l] += acc;
          }
        }
      }
      if (track_b) {
        for (std::size_t l = 0; l < k; ++l) {
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
              acc += an->values[i * k + l] * out->grad[i * n + j];
            }
            bn->grad[l * n + j] += acc;
          }
        }
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

namespace {

void require_matrix(const NodePtr& n, const char* op) {
  if (n->shape.size() != 2 || n->shape[0] == 0 || n->shape[1] == 0) {
    detail::shape_error(op);
  }
}

}  // namespace

Tensor log_softmax(const Tensor& logits) {
  const NodePtr& tn = Kernel::node(logits);
  require_matrix(tn, "log_softmax");
  const std::size_t n = tn->shape[0];
  const std::size_t m = tn->shape[1];

  std::vector<double> values(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = tn->values.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j < m; ++j) {
      mx = std::max(mx, row[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      acc += std::exp(row[j] - mx);
    }
    const double lse = mx + std::log(acc);
    for (std::size_t j = 0; j < m; ++j) {
      values[i * m + j] = row[j] - lse;
    }
  }

  auto tape = Kernel::common_tape({&logits}, "log_softmax");
  NodePtr out =
      Kernel::make_output(tn->shape, std::move(values), tape, "log_softmax");
  if (tape) {
    Kernel::record(tape, [tn, out, n, m] {
      for (std::size_t i = 0; i < n; ++i) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          gsum += out->grad[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) {
          tn->grad[i * m + j] +=
              out->grad[i * m + j] - std::exp(out->values[i * m + j]) * gsum;
        }
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

Tensor logsumexp_rows(const Tensor& t) {
  const NodePtr& tn = Kernel::node(t);
  require_matrix(tn, "logsumexp_rows");
  const std::size_t n = tn->shape[0];
  const std::size_t m = tn->shape[1];

  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = tn->values.data() + i * m;
    double mx = row[0];
    for (std::size_t j = 1; j < m; ++j) {
      mx = std::max(mx, row[j]);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      acc += std::exp(row[j] - mx);
    }
    values[i] = mx + std::log(acc);
  }

  auto tape = Kernel::common_tape({&t}, "logsumexp_rows");
  NodePtr out =
      Kernel::make_output({n}, std::move(values), tape, "logsumexp_rows");
  if (tape) {
    Kernel::record(tape, [tn, out, n, m] {
      for (std::size_t i = 0; i < n; ++i) {
        const double g = out->grad[i];
        for (std::size_t j = 0; j < m; ++j) {
          tn->grad[i * m + j] +=
              g * std::exp(tn->values[i * m + j] - out->values[i]);
        }
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

Tensor repeat_rows(const Tensor& row, std::size_t n) {
  const NodePtr& rn = Kernel::node(row);
  if (rn->shape.size() != 1 || n == 0) {
    detail::shape_error("repeat_rows");
  }
  const std::size_t m = rn->shape[0];
  std::vector<double> values(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(rn->values.begin(), rn->values.end(), values.begin() + i * m);
  }
  auto tape = Kernel::common_tape({&row}, "repeat_rows");
  NodePtr out =
      Kernel::make_output({n, m}, std::move(values), tape, "repeat_rows");
  if (tape) {
    Kernel::record(tape, [rn, out, n, m] {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          rn->grad[j] += out->grad[i * m + j];
        }
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

Tensor repeat_cols(const Tensor& col, std::size_t m) {
  const NodePtr& cn = Kernel::node(col);
  if (cn->shape.size() != 1 || m == 0) {
    detail::shape_error("repeat_cols");
  }
  const std::size_t n = cn->shape[0];
  std::vector<double> values(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(values.begin() + i * m, values.begin() + (i + 1) * m,
              cn->values[i]);
  }
  auto tape = Kernel::common_tape({&col}, "repeat_cols");
  NodePtr out =
      Kernel::make_output({n, m}, std::move(values), tape, "repeat_cols");
  if (tape) {
    Kernel::record(tape, [cn, out, n, m] {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          acc += out->grad[i * m + j];
        }
        cn->grad[i] += acc;
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& index) {
  const NodePtr& tn = Kernel::node(t);
  require_matrix(tn, "gather_rows");
  const std::size_t n = tn->shape[0];
  const std::size_t m = tn->shape[1];
  if (index.size() != n) {
    detail::shape_error("gather_rows");
  }
  for (std::int64_t idx : index) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= m) {
      throw std::invalid_argument("gather_rows: index out of range");
    }
  }
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = tn->values[i * m + static_cast<std::size_t>(index[i])];
  }
  auto tape = Kernel::common_tape({&t}, "gather_rows");
  NodePtr out =
      Kernel::make_output({n}, std::move(values), tape, "gather_rows");
  if (tape) {
    Kernel::record(tape, [tn, out, index, n, m] {
      for (std::size_t i = 0; i < n; ++i) {
        tn->grad[i * m + static_cast<std::size_t>(index[i])] += out->grad[i];
      }
    });
  }
  return Kernel::wrap(std::move(out));
}

}  // namespace rdml
