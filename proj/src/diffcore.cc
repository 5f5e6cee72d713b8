/*
 * Copyright 2026 The NFS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "nfs/diffcore.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "nfs/errors.h"

namespace nfs::diff {

namespace {

[[noreturn]] void ShapeMismatch(std::string_view op, const Tensor& a,
                                const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.ShapeString() +
                   " and " + b.ShapeString());
}

void RequireMatrix(std::string_view op, const Tensor& t) {
  if (t.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " +
                     t.ShapeString());
}

Graph& SameGraph(std::string_view op, Var a, Var b) {
  if (!a.valid() || a.graph() != b.graph())
    throw InvalidArgument(std::string(op) + ": operands belong to different graphs");
  return *a.graph();
}

enum class Broadcast { kNone, kRow, kScalar };

Broadcast BroadcastKind(std::string_view op, const Tensor& a, const Tensor& b) {
  RequireMatrix(op, a);
  RequireMatrix(op, b);
  if (a.SameShape(b)) return Broadcast::kNone;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  ShapeMismatch(op, a, b);
}

std::size_t BroadcastIndex(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kNone:
      return i;
    case Broadcast::kRow:
      return i % cols;
    case Broadcast::kScalar:
      return 0;
  }
  return 0;
}

// Shared skeleton of the broadcasting binary ops. `f` computes the value,
// `da`/`db` the local partial derivatives at (x, y, out).
template <typename F, typename DA, typename DB>
Var Elementwise(std::string_view op, Var a, Var b, F f, DA da, DB db) {
  Graph& g = SameGraph(op, a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = BroadcastKind(op, x, y);
  const std::size_t cols = x.cols();
  Tensor out = Tensor::ZerosLike(x);
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = f(x[i], y[BroadcastIndex(kind, i, cols)]);
  return g.Record(op, std::move(out), {a, b},
                  [kind, cols, da, db](BackwardContext& ctx) {
                    const Tensor& up = ctx.upstream();
                    const Tensor& xv = ctx.input(0);
                    const Tensor& yv = ctx.input(1);
                    const Tensor& ov = ctx.value();
                    if (ctx.wants(0)) {
                      Tensor& gx = ctx.input_grad(0);
                      for (std::size_t i = 0; i < xv.size(); ++i) {
                        const std::size_t j = BroadcastIndex(kind, i, cols);
                        gx[i] += up[i] * da(xv[i], yv[j], ov[i]);
                      }
                    }
                    if (ctx.wants(1)) {
                      Tensor& gy = ctx.input_grad(1);
                      for (std::size_t i = 0; i < xv.size(); ++i) {
                        const std::size_t j = BroadcastIndex(kind, i, cols);
                        gy[j] += up[i] * db(xv[i], yv[j], ov[i]);
                      }
                    }
                  });
}

// Unary elementwise op with derivative expressed from (x, out).
template <typename F, typename D>
Var Unary(std::string_view op, Var a, F f, D d) {
  const Tensor& x = a.value();
  RequireMatrix(op, x);
  Tensor out = Tensor::ZerosLike(x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.graph()->Record(op, std::move(out), {a}, [d](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    const Tensor& xv = ctx.input(0);
    const Tensor& ov = ctx.value();
    Tensor& gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += up[i] * d(xv[i], ov[i]);
  });
}

void CheckAxis(std::string_view op, int axis) {
  if (axis != 0 && axis != 1)
    throw InvalidArgument(std::string(op) + ": axis must be 0 or 1");
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : Tensor(std::vector<std::size_t>{rows, cols}, std::move(values)) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  const std::size_t expected = std::accumulate(
      shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  if (expected != values_.size())
    throw ShapeError("tensor: shape " + ShapeString() + " needs " +
                     std::to_string(expected) + " values, got " +
                     std::to_string(values_.size()));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on tensor of shape " + ShapeString());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on tensor of shape " + ShapeString());
  return shape_[1];
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + ShapeString());
  return values_[0];
}

std::string Tensor::ShapeString() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i > 0) s += "x";
    s += std::to_string(shape_[i]);
  }
  return s + "]";
}

bool Tensor::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

const Tensor& Var::value() const { return graph_->Value(*this); }
const Tensor& Var::grad() const { return graph_->Grad(*this); }

const Tensor& BackwardContext::upstream() const { return graph_.node(node_).grad; }
const Tensor& BackwardContext::value() const { return graph_.node(node_).value; }

const Tensor& BackwardContext::input(std::size_t i) const {
  return graph_.node(graph_.node(node_).inputs.at(i)).value;
}

bool BackwardContext::wants(std::size_t i) const {
  return graph_.node(graph_.node(node_).inputs.at(i)).requires_grad;
}

Tensor& BackwardContext::input_grad(std::size_t i) {
  return graph_.GradAccumulator(graph_.node(node_).inputs.at(i));
}

Var Graph::Leaf(Tensor value) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::Constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Graph::Record(std::string_view op, Tensor value, std::vector<Var> inputs,
                  BackwardRule rule) {
  Node n;
  n.op = std::string(op);
  n.value = std::move(value);
  for (const Var& v : inputs) {
    Check(v);
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || node(v.id()).requires_grad;
  }
  if (n.requires_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Graph::Check(Var v) const {
  if (v.graph() != this || v.id() >= nodes_.size())
    throw InvalidArgument("variable does not belong to this graph");
}

Tensor& Graph::GradAccumulator(std::size_t id) {
  Node& n = node(id);
  if (!n.has_grad) {
    n.grad = Tensor::ZerosLike(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::Backward(Var root) {
  Check(root);
  if (Value(root).size() != 1)
    throw ShapeError("backward: root must be scalar, got shape " +
                     Value(root).ShapeString());
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  GradAccumulator(root.id())[0] = 1.0;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = node(id);
    if (!n.has_grad || !n.requires_grad || !n.rule) continue;
    BackwardContext ctx(*this, id);
    n.rule(ctx);
  }
}

const Tensor& Graph::Value(Var v) const {
  Check(v);
  return node(v.id()).value;
}

const Tensor& Graph::Grad(Var v) const {
  Check(v);
  const Node& n = node(v.id());
  if (!n.has_grad) {
    // Unreached: materialize zeros lazily.
    auto& mutable_node = const_cast<Node&>(n);
    mutable_node.grad = Tensor::ZerosLike(n.value);
    mutable_node.has_grad = true;
  }
  return n.grad;
}

std::string_view Graph::Op(Var v) const {
  Check(v);
  return node(v.id()).op;
}

Var Add(Var a, Var b) {
  return Elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var Sub(Var a, Var b) {
  return Elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var Mul(Var a, Var b) {
  return Elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var Div(Var a, Var b) {
  return Elementwise(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Var Scale(Var a, double factor) {
  return Unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Tensor MatMulValues(const Tensor& a, const Tensor& b) {
  RequireMatrix("matmul", a);
  RequireMatrix("matmul", b);
  if (a.cols() != b.rows()) ShapeMismatch("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out(n, m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* brow = &b.values()[p * m];
      for (std::size_t j = 0; j < m; ++j) row[j] += aip * brow[j];
    }
  }
  return out;
}

Tensor TransposeValues(const Tensor& a) {
  RequireMatrix("transpose", a);
  Tensor out(a.cols(), a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Var MatMul(Var a, Var b) {
  Graph& g = SameGraph("matmul", a, b);
  Tensor out = MatMulValues(a.value(), b.value());
  return g.Record("matmul", std::move(out), {a, b}, [](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    const Tensor& x = ctx.input(0);
    const Tensor& y = ctx.input(1);
    const std::size_t n = x.rows(), k = x.cols(), m = y.cols();
    if (ctx.wants(0)) {
      // dX = G * Y^T
      Tensor& gx = ctx.input_grad(0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += up(i, j) * y(p, j);
          gx(i, p) += acc;
        }
    }
    if (ctx.wants(1)) {
      // dY = X^T * G
      Tensor& gy = ctx.input_grad(1);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double xip = x(i, p);
          if (xip == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gy(p, j) += xip * up(i, j);
        }
    }
  });
}

Var Transpose(Var a) {
  Tensor out = TransposeValues(a.value());
  return a.graph()->Record("transpose", std::move(out), {a}, [](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    Tensor& gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < up.rows(); ++i)
      for (std::size_t j = 0; j < up.cols(); ++j) gx(j, i) += up(i, j);
  });
}

Var Relu(Var a) {
  return Unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var Sigmoid(Var a) {
  return Unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Var Log1p(Var a) {
  return Unary(
      "log1p", a, [](double x) { return std::log1p(x); },
      [](double x, double) { return 1.0 / (1.0 + x); });
}

Var SignedLog1p(Var a) {
  return Unary(
      "signed_log1p", a,
      [](double x) { return std::copysign(std::log1p(std::fabs(x)), x); },
      [](double x, double) { return 1.0 / (1.0 + std::fabs(x)); });
}

Var Softsign(Var a) {
  return Unary(
      "softsign", a, [](double x) { return x / (1.0 + std::fabs(x)); },
      [](double x, double) {
        const double d = 1.0 + std::fabs(x);
        return 1.0 / (d * d);
      });
}

Var Softmax(Var a) {
  const Tensor& x = a.value();
  RequireMatrix("softmax", x);
  Tensor out = Tensor::ZerosLike(x);
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double max = x(r, 0);
    for (std::size_t c = 1; c < cols; ++c) max = std::max(max, x(r, c));
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp(x(r, c) - max);
      total += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= total;
  }
  return a.graph()->Record("softmax", std::move(out), {a}, [](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    const Tensor& s = ctx.value();
    Tensor& gx = ctx.input_grad(0);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < s.cols(); ++c) dot += up(r, c) * s(r, c);
      for (std::size_t c = 0; c < s.cols(); ++c) gx(r, c) += s(r, c) * (up(r, c) - dot);
    }
  });
}

Var Concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  Graph& g = *parts.front().graph();
  const std::size_t rows = parts.front().value().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    SameGraph("concat", parts.front(), p);
    RequireMatrix("concat", p.value());
    if (p.value().rows() != rows) ShapeMismatch("concat", parts.front().value(), p.value());
    cols += p.value().cols();
  }
  Tensor out(rows, cols, 0.0);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    offset += v.cols();
  }
  return g.Record("concat", std::move(out), parts, [](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    std::size_t offset = 0;
    for (std::size_t i = 0;; ++i) {
      if (offset >= up.cols()) break;
      const std::size_t width = ctx.input(i).cols();
      if (ctx.wants(i)) {
        Tensor& gp = ctx.input_grad(i);
        for (std::size_t r = 0; r < up.rows(); ++r)
          for (std::size_t c = 0; c < width; ++c) gp(r, c) += up(r, offset + c);
      }
      offset += width;
    }
  });
}

Var Slice(Var a, int axis, std::size_t begin, std::size_t end) {
  CheckAxis("slice", axis);
  const Tensor& x = a.value();
  RequireMatrix("slice", x);
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (begin >= end || end > extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid on axis " +
                     std::to_string(axis) + " of shape " + x.ShapeString());
  const std::size_t rows = axis == 0 ? end - begin : x.rows();
  const std::size_t cols = axis == 1 ? end - begin : x.cols();
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 1 ? begin : 0;
  Tensor out(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = x(r0 + r, c0 + c);
  return a.graph()->Record("slice", std::move(out), {a}, [r0, c0](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    Tensor& gx = ctx.input_grad(0);
    for (std::size_t r = 0; r < up.rows(); ++r)
      for (std::size_t c = 0; c < up.cols(); ++c) gx(r0 + r, c0 + c) += up(r, c);
  });
}

Var Sum(Var a, int axis) {
  CheckAxis("sum", axis);
  const Tensor& x = a.value();
  RequireMatrix("sum", x);
  Tensor out = axis == 0 ? Tensor(1, x.cols(), 0.0) : Tensor(x.rows(), 1, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c)
      (axis == 0 ? out(0, c) : out(r, 0)) += x(r, c);
  return a.graph()->Record("sum", std::move(out), {a}, [axis](BackwardContext& ctx) {
    const Tensor& up = ctx.upstream();
    Tensor& gx = ctx.input_grad(0);
    for (std::size_t r = 0; r < gx.rows(); ++r)
      for (std::size_t c = 0; c < gx.cols(); ++c)
        gx(r, c) += axis == 0 ? up(0, c) : up(r, 0);
  });
}

Var Mean(Var a, int axis) {
  CheckAxis("mean", axis);
  const Tensor& x = a.value();
  RequireMatrix("mean", x);
  const std::size_t n = axis == 0 ? x.rows() : x.cols();
  return Scale(Sum(a, axis), 1.0 / static_cast<double>(n));
}

Var SumAll(Var a) {
  const Tensor& x = a.value();
  RequireMatrix("sum_all", x);
  double total = 0.0;
  for (const double v : x.values()) total += v;
  return a.graph()->Record("sum_all", Tensor::Scalar(total), {a}, [](BackwardContext& ctx) {
    const double up = ctx.upstream()[0];
    Tensor& gx = ctx.input_grad(0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += up;
  });
}

Var MeanAll(Var a) {
  return Scale(SumAll(a), 1.0 / static_cast<double>(a.value().size()));
}

}  // namespace nfs::diff
