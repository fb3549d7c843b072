#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jmee/tensor.hpp"

namespace jmee::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Propagates the gradient of node `self` into its parents.
using BackwardFn = std::function<void(Tape&, std::size_t self)>;

/// Wengert list for one forward pass. Nodes are appended in evaluation
/// order, so reverse creation order is a reverse topological order.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  /// Leaf that reads `value` in place; `value` must outlive the tape.
  /// `slot` identifies the parameter when gradients are collected.
  Var parameter(const Tensor& value, std::size_t slot);

  Var record(std::string_view op, Tensor value, std::vector<std::size_t> parents,
             BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  /// Gradient of the last backward root w.r.t. this node (zeros if the node
  /// was not reached).
  Tensor grad(Var v) const;
  /// Lazily zero-initialised accumulation buffer.
  Tensor& grad_buffer(std::size_t id);

  /// Reverse sweep from a scalar root. Gradients accumulate, so a node used
  /// twice receives the sum of both contributions.
  void backward(Var root);
  /// Vector-Jacobian product: propagates `seed` as the gradient of `output`.
  void backward(Var output, const Tensor& seed);

  /// Visits (slot, gradient) for every parameter leaf that received a
  /// gradient.
  void for_each_parameter_grad(
      const std::function<void(std::size_t, const Tensor&)>& fn) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    std::string_view op;
    std::optional<std::size_t> slot;
    bool needs_grad = false;
  };

  std::deque<Node> nodes_;  // stable references across appends
};

/// Test hook: when set, the backward rule of the named op is deliberately
/// wrong (upstream gradient scaled by 1.5). Used as a negative control for
/// gradient checking.
void set_backward_fault(std::optional<std::string> op);
std::optional<std::string> backward_fault();

enum class UnaryOp { sigmoid, tanh, relu, exp };
enum class BinaryOp { add, sub, mul };
enum class ReduceOp { sum, mean, max };

Var matmul(Var a, Var b);
Var elementwise(UnaryOp op, Var x);
Var elementwise(BinaryOp op, Var a, Var b);

inline Var add(Var a, Var b) { return elementwise(BinaryOp::add, a, b); }
inline Var sub(Var a, Var b) { return elementwise(BinaryOp::sub, a, b); }
inline Var mul(Var a, Var b) { return elementwise(BinaryOp::mul, a, b); }
inline Var sigmoid(Var x) { return elementwise(UnaryOp::sigmoid, x); }
inline Var tanh(Var x) { return elementwise(UnaryOp::tanh, x); }
inline Var relu(Var x) { return elementwise(UnaryOp::relu, x); }
inline Var exp(Var x) { return elementwise(UnaryOp::exp, x); }

/// scale * x + shift, elementwise.
Var affine(Var x, double scale, double shift);
/// x[m x n] + b broadcast over rows; b has n elements.
Var add_bias(Var x, Var b);
/// Row i of x[m x n] scaled by g[i]; g has m elements.
Var mul_column(Var x, Var g);

Var softmax(Var x, std::size_t axis);
Var log_softmax(Var x, std::size_t axis);
Var concat(std::span<const Var> parts, std::size_t axis);
inline Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}
/// Reduction keeping the reduced axis with size 1. Max routes the gradient
/// to the first maximal index.
Var reduce(ReduceOp op, Var x, std::size_t axis);
Var sum_all(Var x);

/// Row `index` of table[V x d] as a rank-1 tensor of d elements.
Var embedding_lookup(Var table, std::size_t index);
/// Rows `indices` of x stacked into a [k x d] matrix.
Var gather_rows(Var x, std::span<const std::size_t> indices);
/// out[indices[i]] += x[i]; output has `rows` rows.
Var scatter_add_rows(Var x, std::span<const std::size_t> indices,
                     std::size_t rows);
Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length);
/// out[i] = x[i, targets[i]] as an [m x 1] column.
Var pick(Var x, std::span<const std::size_t> targets);
/// Inverted dropout: kept entries are scaled by 1 / (1 - rate).
Var dropout(Var x, double rate, std::mt19937_64& rng);

}  // namespace jmee::ad
