#include "jmee/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

namespace jmee::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

std::mutex g_fault_mutex;
std::optional<std::string> g_fault;

MapC as_matrix(const Tensor& t) {
  return MapC(t.data().data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}

Map as_matrix(Tensor& t) {
  return Map(t.data().data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

void require_rank2(std::string_view op, const Tensor& t) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_string(t.shape()));
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(std::string_view op, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " invalid for shape " + shape_string(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Tape& tape_of(Var v) {
  if (!v.valid()) throw std::logic_error("operation on an unbound Var");
  return v.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (&t != &tape_of(b))
    throw std::logic_error("operands recorded on different tapes");
  return t;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

void set_backward_fault(std::optional<std::string> op) {
  std::lock_guard lock(g_fault_mutex);
  g_fault = std::move(op);
}

std::optional<std::string> backward_fault() {
  std::lock_guard lock(g_fault_mutex);
  return g_fault;
}

// ---------------------------------------------------------------------------
// Tape

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.owned = std::move(value);
  n.op = "variable";
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Tensor& value, std::size_t slot) {
  Node n;
  n.external = &value;
  n.op = "parameter";
  n.slot = slot;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value,
                 std::vector<std::size_t> parents, BackwardFn backward) {
  if (!value.all_finite())
    throw NumericError(std::string(op) + " produced non-finite values");
  Node n;
  n.owned = std::move(value);
  n.op = op;
  n.needs_grad = std::any_of(parents.begin(), parents.end(),
                             [this](std::size_t p) { return nodes_[p].needs_grad; });
  if (n.needs_grad) {
    n.parents = std::move(parents);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.grad.empty()) return n.grad;
  return Tensor(value(v.id()).shape(), 0.0);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw std::logic_error("backward root from another tape");
  if (value(root.id()).size() != 1)
    throw DimensionError("backward needs a scalar root, got " +
                         shape_string(value(root.id()).shape()));
  backward(root, Tensor(value(root.id()).shape(), 1.0));
}

void Tape::backward(Var output, const Tensor& seed) {
  if (output.tape_ != this) throw std::logic_error("backward root from another tape");
  if (seed.shape() != value(output.id()).shape())
    throw DimensionError("backward seed " + shape_string(seed.shape()) + " does not match output " +
                         shape_string(value(output.id()).shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  grad_buffer(output.id()) = seed;

  const auto fault = backward_fault();
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.backward) continue;
    if (fault && *fault == n.op) {
      for (auto& g : n.grad.storage()) g *= 1.5;
    }
    n.backward(*this, i);
  }
}

void Tape::for_each_parameter_grad(
    const std::function<void(std::size_t, const Tensor&)>& fn) const {
  for (const auto& n : nodes_)
    if (n.slot && !n.grad.empty()) fn(*n.slot, n.grad);
}

// ---------------------------------------------------------------------------
// Operations

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("matmul", A);
  require_rank2("matmul", B);
  if (A.cols() != B.rows())
    throw DimensionError("matmul: inner dimensions differ for " +
                         shape_string(A.shape()) + " x " + shape_string(B.shape()));
  Tensor C({A.rows(), B.cols()});
  as_matrix(C).noalias() = as_matrix(A) * as_matrix(B);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(C), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    if (tp.needs_grad(ia))
      as_matrix(tp.grad_buffer(ia)).noalias() +=
          as_matrix(G) * as_matrix(tp.value(ib)).transpose();
    if (tp.needs_grad(ib))
      as_matrix(tp.grad_buffer(ib)).noalias() +=
          as_matrix(tp.value(ia)).transpose() * as_matrix(G);
  });
}

Var elementwise(UnaryOp op, Var x) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  Tensor Y(X.shape());
  const auto xs = X.data();
  auto ys = Y.data();
  std::string_view name;
  switch (op) {
    case UnaryOp::sigmoid:
      name = "sigmoid";
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = xs[i];
        // Branch keeps exp() from overflowing for large |v|.
        ys[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }
      break;
    case UnaryOp::tanh:
      name = "tanh";
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = std::tanh(xs[i]);
      break;
    case UnaryOp::relu:
      name = "relu";
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] > 0 ? xs[i] : 0.0;
      break;
    case UnaryOp::exp:
      name = "exp";
      for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = std::exp(xs[i]);
      break;
  }
  const std::size_t ix = x.id();
  return t.record(name, std::move(Y), {ix}, [op, ix](Tape& tp, std::size_t self) {
    const auto g = tp.grad_buffer(self).data();
    const auto y = tp.value(self).data();
    const auto xv = tp.value(ix).data();
    auto dx = tp.grad_buffer(ix).data();
    switch (op) {
      case UnaryOp::sigmoid:
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      case UnaryOp::tanh:
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      case UnaryOp::relu:
        for (std::size_t i = 0; i < g.size(); ++i)
          if (xv[i] > 0) dx[i] += g[i];
        break;
      case UnaryOp::exp:
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * y[i];
        break;
    }
  });
}

Var elementwise(BinaryOp op, Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  std::string_view name = op == BinaryOp::add ? "add" : op == BinaryOp::sub ? "sub" : "mul";
  require_same_shape(name, A, B);
  Tensor C(A.shape());
  const auto as = A.data(), bs = B.data();
  auto cs = C.data();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    switch (op) {
      case BinaryOp::add: cs[i] = as[i] + bs[i]; break;
      case BinaryOp::sub: cs[i] = as[i] - bs[i]; break;
      case BinaryOp::mul: cs[i] = as[i] * bs[i]; break;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(name, std::move(C), {ia, ib}, [op, ia, ib](Tape& tp, std::size_t self) {
    const auto g = tp.grad_buffer(self).data();
    if (tp.needs_grad(ia)) {
      auto da = tp.grad_buffer(ia).data();
      const auto bv = tp.value(ib).data();
      for (std::size_t i = 0; i < g.size(); ++i)
        da[i] += op == BinaryOp::mul ? g[i] * bv[i] : g[i];
    }
    if (tp.needs_grad(ib)) {
      auto db = tp.grad_buffer(ib).data();
      const auto av = tp.value(ia).data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (op) {
          case BinaryOp::add: db[i] += g[i]; break;
          case BinaryOp::sub: db[i] -= g[i]; break;
          case BinaryOp::mul: db[i] += g[i] * av[i]; break;
        }
      }
    }
  });
}

Var affine(Var x, double scale, double shift) {
  Tape& t = tape_of(x);
  Tensor Y = x.value();
  for (auto& v : Y.storage()) v = scale * v + shift;
  const std::size_t ix = x.id();
  return t.record("affine", std::move(Y), {ix}, [ix, scale](Tape& tp, std::size_t self) {
    const auto g = tp.grad_buffer(self).data();
    auto dx = tp.grad_buffer(ix).data();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += scale * g[i];
  });
}

Var add_bias(Var x, Var b) {
  Tape& t = common_tape(x, b);
  const Tensor& X = x.value();
  const Tensor& B = b.value();
  require_rank2("add_bias", X);
  if (B.size() != X.cols())
    throw DimensionError("add_bias: bias " + shape_string(B.shape()) +
                         " does not match columns of " + shape_string(X.shape()));
  Tensor Y = X;
  as_matrix(Y).rowwise() +=
      Eigen::Map<const Eigen::RowVectorXd>(B.data().data(), static_cast<Eigen::Index>(B.size()));
  const std::size_t ix = x.id(), ib = b.id();
  return t.record("add_bias", std::move(Y), {ix, ib}, [ix, ib](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    if (tp.needs_grad(ix)) as_matrix(tp.grad_buffer(ix)) += as_matrix(G);
    if (tp.needs_grad(ib)) {
      Tensor& db = tp.grad_buffer(ib);
      Eigen::Map<Eigen::RowVectorXd>(db.data().data(), static_cast<Eigen::Index>(db.size())) +=
          as_matrix(G).colwise().sum();
    }
  });
}

Var mul_column(Var x, Var g) {
  Tape& t = common_tape(x, g);
  const Tensor& X = x.value();
  const Tensor& Gv = g.value();
  require_rank2("mul_column", X);
  if (Gv.size() != X.rows())
    throw DimensionError("mul_column: gate " + shape_string(Gv.shape()) +
                         " does not match rows of " + shape_string(X.shape()));
  Tensor Y = X;
  const std::size_t m = X.rows(), n = X.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) Y[r * n + c] *= Gv[r];
  const std::size_t ix = x.id(), ig = g.id();
  return t.record("mul_column", std::move(Y), {ix, ig}, [ix, ig, m, n](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    if (tp.needs_grad(ix)) {
      auto dx = tp.grad_buffer(ix).data();
      const auto gv = tp.value(ig).data();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) dx[r * n + c] += G[r * n + c] * gv[r];
    }
    if (tp.needs_grad(ig)) {
      auto dg = tp.grad_buffer(ig).data();
      const auto xv = tp.value(ix).data();
      for (std::size_t r = 0; r < m; ++r) {
        double acc = 0;
        for (std::size_t c = 0; c < n; ++c) acc += G[r * n + c] * xv[r * n + c];
        dg[r] += acc;
      }
    }
  });
}

namespace {

template <typename F>
void for_each_lane(const AxisSplit& s, F&& f) {
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) f(o * s.len * s.inner + in, s.inner);
}

}  // namespace

Var softmax(Var x, std::size_t axis) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  const AxisSplit s = split_axis("softmax", X.shape(), axis);
  Tensor Y(X.shape());
  for_each_lane(s, [&](std::size_t base, std::size_t stride) {
    double mx = X[base];
    for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, X[base + k * stride]);
    double z = 0;
    for (std::size_t k = 0; k < s.len; ++k) {
      const double e = std::exp(X[base + k * stride] - mx);
      Y[base + k * stride] = e;
      z += e;
    }
    for (std::size_t k = 0; k < s.len; ++k) Y[base + k * stride] /= z;
  });
  const std::size_t ix = x.id();
  return t.record("softmax", std::move(Y), {ix}, [ix, s](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& Yv = tp.value(self);
    Tensor& dX = tp.grad_buffer(ix);
    for_each_lane(s, [&](std::size_t base, std::size_t stride) {
      double dot = 0;
      for (std::size_t k = 0; k < s.len; ++k)
        dot += G[base + k * stride] * Yv[base + k * stride];
      for (std::size_t k = 0; k < s.len; ++k) {
        const std::size_t i = base + k * stride;
        dX[i] += Yv[i] * (G[i] - dot);
      }
    });
  });
}

Var log_softmax(Var x, std::size_t axis) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  const AxisSplit s = split_axis("log_softmax", X.shape(), axis);
  Tensor Y(X.shape());
  for_each_lane(s, [&](std::size_t base, std::size_t stride) {
    double mx = X[base];
    for (std::size_t k = 1; k < s.len; ++k) mx = std::max(mx, X[base + k * stride]);
    double z = 0;
    for (std::size_t k = 0; k < s.len; ++k) z += std::exp(X[base + k * stride] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t k = 0; k < s.len; ++k)
      Y[base + k * stride] = X[base + k * stride] - lz;
  });
  const std::size_t ix = x.id();
  return t.record("log_softmax", std::move(Y), {ix}, [ix, s](Tape& tp, std::size_t self) {
    const Tensor& G = tp.grad_buffer(self);
    const Tensor& Yv = tp.value(self);
    Tensor& dX = tp.grad_buffer(ix);
    for_each_lane(s, [&](std::size_t base, std::size_t stride) {
      double gsum = 0;
      for (std::size_t k = 0; k < s.len; ++k) gsum += G[base + k * stride];
      for (std::size_t k = 0; k < s.len; ++k) {
        const std::size_t i = base + k * stride;
        dX[i] += G[i] - std::exp(Yv[i]) * gsum;
      }
    });
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  Tape& t = tape_of(parts[0]);
  const Shape& first = parts[0].shape();
  if (axis >= first.size())
    throw DimensionError("concat: axis " + std::to_string(axis) +
                         " invalid for shape " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (&tape_of(p) != &t) throw std::logic_error("concat: parts on different tapes");
    const Shape& sh = p.shape();
    if (sh.size() != first.size())
      throw DimensionError("concat: rank mismatch " + shape_string(first) + " vs " +
                           shape_string(sh));
    for (std::size_t d = 0; d < sh.size(); ++d)
      if (d != axis && sh[d] != first[d])
        throw DimensionError("concat: non-concat dimensions differ " +
                             shape_string(first) + " vs " + shape_string(sh));
    lens.push_back(sh[axis]);
    out_shape[axis] += sh[axis];
    ids.push_back(p.id());
  }
  const AxisSplit s = split_axis("concat", out_shape, axis);
  Tensor Y(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].value().data();
    const std::size_t block = lens[p] * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  Y.data().begin() + static_cast<std::ptrdiff_t>(o * s.len * s.inner + offset));
    offset += block;
  }
  return t.record("concat", std::move(Y), ids, [ids, lens, s](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    std::size_t offset = 0;
    for (std::size_t p = 0; p < ids.size(); ++p) {
      const std::size_t block = lens[p] * s.inner;
      if (tp.needs_grad(ids[p])) {
        auto dp = tp.grad_buffer(ids[p]).data();
        for (std::size_t o = 0; o < s.outer; ++o) {
          const std::size_t src = o * s.len * s.inner + offset;
          for (std::size_t k = 0; k < block; ++k) dp[o * block + k] += G[src + k];
        }
      }
      offset += block;
    }
  });
}

Var reduce(ReduceOp op, Var x, std::size_t axis) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  const AxisSplit s = split_axis("reduce", X.shape(), axis);
  Shape out_shape = X.shape();
  out_shape[axis] = 1;
  Tensor Y(out_shape);
  std::vector<std::size_t> argmax;
  if (op == ReduceOp::max) argmax.resize(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      double acc = op == ReduceOp::max ? X[base] : 0.0;
      std::size_t best = 0;
      for (std::size_t k = 0; k < s.len; ++k) {
        const double v = X[base + k * s.inner];
        if (op == ReduceOp::max) {
          if (v > acc) {
            acc = v;
            best = k;
          }
        } else {
          acc += v;
        }
      }
      if (op == ReduceOp::mean) acc /= static_cast<double>(s.len);
      Y[o * s.inner + in] = acc;
      if (op == ReduceOp::max) argmax[o * s.inner + in] = best;
    }
  }
  const std::string_view name =
      op == ReduceOp::sum ? "reduce_sum" : op == ReduceOp::mean ? "reduce_mean" : "reduce_max";
  const std::size_t ix = x.id();
  return t.record(name, std::move(Y), {ix},
                  [ix, op, s, argmax = std::move(argmax)](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dX = tp.grad_buffer(ix).data();
    const double scale = op == ReduceOp::mean ? 1.0 / static_cast<double>(s.len) : 1.0;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        const double g = G[o * s.inner + in];
        if (op == ReduceOp::max) {
          dX[base + argmax[o * s.inner + in] * s.inner] += g;
        } else {
          for (std::size_t k = 0; k < s.len; ++k) dX[base + k * s.inner] += g * scale;
        }
      }
    }
  });
}

Var sum_all(Var x) {
  Tape& t = tape_of(x);
  const auto xs = x.value().data();
  const double total = std::accumulate(xs.begin(), xs.end(), 0.0);
  const std::size_t ix = x.id();
  return t.record("sum_all", Tensor::scalar(total), {ix}, [ix](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self)[0];
    for (auto& d : tp.grad_buffer(ix).storage()) d += g;
  });
}

Var embedding_lookup(Var table, std::size_t index) {
  Tape& t = tape_of(table);
  const Tensor& T = table.value();
  require_rank2("embedding_lookup", T);
  if (index >= T.rows())
    throw std::out_of_range("embedding_lookup: index " + std::to_string(index) +
                            " out of range for table with " + std::to_string(T.rows()) +
                            " rows");
  const std::size_t d = T.cols();
  std::vector<double> row(T.data().begin() + static_cast<std::ptrdiff_t>(index * d),
                          T.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * d));
  const std::size_t it = table.id();
  return t.record("embedding_lookup", Tensor({d}, std::move(row)), {it},
                  [it, index, d](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dT = tp.grad_buffer(it).data();
    for (std::size_t k = 0; k < d; ++k) dT[index * d + k] += G[k];
  });
}

Var gather_rows(Var x, std::span<const std::size_t> indices) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  require_rank2("gather_rows", X);
  if (indices.empty()) throw DimensionError("gather_rows: empty index list");
  const std::size_t d = X.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor Y({idx.size(), d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= X.rows())
      throw std::out_of_range("gather_rows: row " + std::to_string(idx[r]) +
                              " out of range for " + shape_string(X.shape()));
    std::copy_n(X.data().begin() + static_cast<std::ptrdiff_t>(idx[r] * d), d,
                Y.data().begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const std::size_t ix = x.id();
  return t.record("gather_rows", std::move(Y), {ix},
                  [ix, idx = std::move(idx), d](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dX = tp.grad_buffer(ix).data();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t k = 0; k < d; ++k) dX[idx[r] * d + k] += G[r * d + k];
  });
}

Var scatter_add_rows(Var x, std::span<const std::size_t> indices, std::size_t rows) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  require_rank2("scatter_add_rows", X);
  if (indices.size() != X.rows())
    throw DimensionError("scatter_add_rows: " + std::to_string(indices.size()) +
                         " indices for " + shape_string(X.shape()));
  const std::size_t d = X.cols();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  Tensor Y({rows, d});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows)
      throw std::out_of_range("scatter_add_rows: target row " + std::to_string(idx[r]) +
                              " out of range for " + std::to_string(rows) + " rows");
    for (std::size_t k = 0; k < d; ++k) Y[idx[r] * d + k] += X[r * d + k];
  }
  const std::size_t ix = x.id();
  return t.record("scatter_add_rows", std::move(Y), {ix},
                  [ix, idx = std::move(idx), d](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dX = tp.grad_buffer(ix).data();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t k = 0; k < d; ++k) dX[r * d + k] += G[idx[r] * d + k];
  });
}

Var slice(Var x, std::size_t axis, std::size_t start, std::size_t length) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  const AxisSplit s = split_axis("slice", X.shape(), axis);
  if (length == 0 || start + length > s.len)
    throw DimensionError("slice: [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") invalid on axis " +
                         std::to_string(axis) + " of " + shape_string(X.shape()));
  Shape out_shape = X.shape();
  out_shape[axis] = length;
  Tensor Y(out_shape);
  const std::size_t block = length * s.inner;
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(X.data().begin() + static_cast<std::ptrdiff_t>(o * s.len * s.inner + start * s.inner),
                block, Y.data().begin() + static_cast<std::ptrdiff_t>(o * block));
  const std::size_t ix = x.id();
  return t.record("slice", std::move(Y), {ix}, [ix, s, start, block](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dX = tp.grad_buffer(ix).data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      const std::size_t dst = o * s.len * s.inner + start * s.inner;
      for (std::size_t k = 0; k < block; ++k) dX[dst + k] += G[o * block + k];
    }
  });
}

Var pick(Var x, std::span<const std::size_t> targets) {
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  require_rank2("pick", X);
  if (targets.size() != X.rows())
    throw DimensionError("pick: " + std::to_string(targets.size()) + " targets for " +
                         shape_string(X.shape()));
  const std::size_t n = X.cols();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  Tensor Y({tg.size(), 1});
  for (std::size_t r = 0; r < tg.size(); ++r) {
    if (tg[r] >= n)
      throw std::out_of_range("pick: target " + std::to_string(tg[r]) + " out of range for " +
                              shape_string(X.shape()));
    Y[r] = X[r * n + tg[r]];
  }
  const std::size_t ix = x.id();
  return t.record("pick", std::move(Y), {ix}, [ix, tg = std::move(tg), n](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dX = tp.grad_buffer(ix).data();
    for (std::size_t r = 0; r < tg.size(); ++r) dX[r * n + tg[r]] += G[r];
  });
}

Var dropout(Var x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  Tape& t = tape_of(x);
  const Tensor& X = x.value();
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(X.size());
  for (auto& m : mask) m = uniform01(rng) >= rate ? keep_scale : 0.0;
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < mask.size(); ++i) Y[i] = X[i] * mask[i];
  const std::size_t ix = x.id();
  return t.record("dropout", std::move(Y), {ix}, [ix, mask = std::move(mask)](Tape& tp, std::size_t self) {
    const auto G = tp.grad_buffer(self).data();
    auto dX = tp.grad_buffer(ix).data();
    for (std::size_t i = 0; i < mask.size(); ++i) dX[i] += G[i] * mask[i];
  });
}

}  // namespace jmee::ad
