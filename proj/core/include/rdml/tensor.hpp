// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace rdml {

class Tape;

namespace detail {

struct TapeState {
  std::vector<std::function<void()>> steps;  // forward order, run in reverse
  bool consumed = false;
};

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized iff requires_grad
  bool requires_grad = false;
  std::weak_ptr<TapeState> tape;
};

struct OpKernel;

}  // namespace detail

// Dense row-major f64 tensor. Copying a Tensor copies the handle, not the
// buffer; tensors produced by ops are never mutated in place while their tape
// is live. A rank-0 tensor (shape {}) holds one scalar.
class Tensor {
 public:
  Tensor();  // rank-0 zero scalar
  explicit Tensor(double scalar);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  // Mutable access to a leaf's buffer (parameter updates between steps).
  // Throws std::logic_error if the tensor sits on a live, unconsumed tape.
  std::span<double> values_mut();

  bool requires_grad() const { return node_->requires_grad; }
  std::span<const double> grad() const;

  double item() const;                         // size-1 tensors only
  double at(std::size_t i) const;              // rank-1
  double at(std::size_t i, std::size_t j) const;  // rank-2

  // Deep copy with no tape attachment and no gradient: a constant.
  Tensor detached() const;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node);
  std::shared_ptr<detail::TensorNode> node_;

  friend class Tape;
  friend struct detail::OpKernel;
};

// Reverse-mode gradient tape. Ops record themselves when an input is watched;
// backward() replays the records once, in reverse, accumulating into leaf
// gradients. One backward per tape.
class Tape {
 public:
  Tape();

  // Marks a leaf for gradient tracking on this tape; zeroes its grad buffer.
  void watch(Tensor& tensor);

  // root must be a size-1 tensor recorded on this tape.
  void backward(const Tensor& root);

  bool consumed() const { return state_->consumed; }
  std::size_t recorded_steps() const { return state_->steps.size(); }

 private:
  std::shared_ptr<detail::TapeState> state_;
  friend struct detail::OpKernel;
};

// Elementwise binary ops accept equal shapes or a size-1 tensor on either
// side (scalar broadcast). Every op validates shapes and rejects non-finite
// results so NaN/Inf never enters the tape silently.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor max(const Tensor& a, const Tensor& b);

Tensor log(const Tensor& t);   // domain error on any entry <= 0
Tensor exp(const Tensor& t);
Tensor pow(const Tensor& t, double exponent);
Tensor relu(const Tensor& t);
Tensor clamp(const Tensor& t, double lo, double hi);
Tensor neg(const Tensor& t);

Tensor sum(const Tensor& t);                    // all elements -> rank-0
Tensor sum(const Tensor& t, std::size_t axis);  // axis removed
Tensor mean(const Tensor& t);
Tensor mean(const Tensor& t, std::size_t axis);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]

// Row-stable softmax helpers over the last axis of a rank-2 tensor.
Tensor log_softmax(const Tensor& logits);
Tensor logsumexp_rows(const Tensor& t);  // [n,m] -> [n]

// Broadcast builders for row/column vectors.
Tensor repeat_rows(const Tensor& row, std::size_t n);  // [m] -> [n,m]
Tensor repeat_cols(const Tensor& col, std::size_t m);  // [n] -> [n,m]

// out[i] = t[i, index[i]]
Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& index);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator+(const Tensor& a, double b) { return add(a, Tensor(b)); }
inline Tensor operator-(const Tensor& a, double b) { return sub(a, Tensor(b)); }
inline Tensor operator*(const Tensor& a, double b) { return mul(a, Tensor(b)); }
inline Tensor operator+(double a, const Tensor& b) { return add(Tensor(a), b); }
inline Tensor operator-(double a, const Tensor& b) { return sub(Tensor(a), b); }
inline Tensor operator*(double a, const Tensor& b) { return mul(Tensor(a), b); }

}  // namespace rdml
