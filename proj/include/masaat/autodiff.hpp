#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "masaat/tensor.hpp"

namespace masaat::nn {

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so every node's
// inputs precede it and backward() is a single reverse sweep.
//
// A tape is single-writer. Independent tapes may live on different threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var variable(Tensor value) { return leaf(std::move(value), true); }

  // Records the result of a primitive. `backward` is dropped when no input
  // requires a gradient.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward, const char* op);

  // Seeds d(loss)/d(loss) = 1 and propagates. Throws ContractError for a
  // non-scalar loss. May be called once per tape.
  void backward(Var loss);

  // Gradient of the last backward() loss w.r.t. `v`; zeros when unreached.
  Tensor grad(Var v) const;

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_ref(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of node `id`, zero-initialised on first access.
  Tensor& accumulator(std::size_t id);
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- differentiable primitives (all operate on rank-2 values) ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// a[m x n] + bias[1 x n] on every row.
Var add_row(Var a, Var bias);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var gelu(Var a);
Var softmax_rows(Var a);
// Per-row normalisation followed by gamma/beta ([1 x n] each).
Var layer_norm_rows(Var a, Var gamma, Var beta, double eps);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_cols(std::span<const Var> parts);
// Row r multiplied by the constant factors[r].
Var scale_rows(Var a, std::span<const double> factors);
Var log(Var a);
Var abs(Var a);
// Sum of all entries as a [1 x 1] value.
Var sum(Var a);
// a divided / multiplied by a [1 x 1] node.
Var div_by(Var a, Var scalar);
Var mul_by(Var a, Var scalar);

// ---- plain tensor kernels shared with the tape ops ----

double gelu_scalar(double x);
double gelu_derivative(double x);
Tensor gelu(const Tensor& x);
// axis 0: columns sum to one; axis 1 (or -1): rows sum to one.
Tensor softmax(const Tensor& x, int axis = -1);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace masaat::nn
