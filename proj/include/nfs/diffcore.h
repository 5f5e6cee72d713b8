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

// A small reverse-mode differentiation engine over dense row-major matrices.
//
// A Graph is a tape: nodes are appended in evaluation order, so the tape
// order is a topological order and Backward() walks it in reverse, visiting
// every reachable node once. Gradients are available for every node,
// including input leaves, which is what saliency maps are made of.
//
// Primitives operate on rank-2 tensors; scalars are 1x1. A graph must be
// built and differentiated on one thread. Distinct graphs are independent.

#ifndef NFS_DIFFCORE_H_
#define NFS_DIFFCORE_H_

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nfs::diff {

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor Scalar(double value) { return Tensor(1, 1, value); }
  static Tensor ZerosLike(const Tensor& t) { return Tensor(t.shape_, std::vector<double>(t.size(), 0.0)); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  // Rank-2 accessors; throw ShapeError for other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  double operator()(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double item() const;

  bool SameShape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string ShapeString() const;
  bool AllFinite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the Graph lives.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t id() const { return id_; }
  Graph* graph() const { return graph_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// What a backward rule sees: the node's upstream gradient, its forward value,
// its inputs' values, and accumulators for its inputs' gradients.
class BackwardContext {
 public:
  const Tensor& upstream() const;
  const Tensor& value() const;
  const Tensor& input(std::size_t i) const;
  // Whether input i leads to a leaf; rules may skip work when false.
  bool wants(std::size_t i) const;
  // Zero-initialized on first access; rules must add, never assign.
  Tensor& input_grad(std::size_t i);

 private:
  friend class Graph;
  BackwardContext(Graph& graph, std::size_t node) : graph_(graph), node_(node) {}
  Graph& graph_;
  std::size_t node_;
};

using BackwardRule = std::function<void(BackwardContext&)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Differentiable input.
  Var Leaf(Tensor value);
  // Input whose gradient is never needed.
  Var Constant(Tensor value);
  // Appends an operation node. Extension point for ops defined outside this
  // library (batch normalization, dropout).
  Var Record(std::string_view op, Tensor value, std::vector<Var> inputs,
             BackwardRule rule);

  // Reverse sweep from a 1x1 root. Clears gradients of a previous sweep.
  void Backward(Var root);

  const Tensor& Value(Var v) const;
  // Gradient of the last Backward root; zeros for unreached nodes.
  const Tensor& Grad(Var v) const;
  std::string_view Op(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class BackwardContext;
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardRule rule;
  };
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  Tensor& GradAccumulator(std::size_t id);
  void Check(Var v) const;

  std::deque<Node> nodes_;
};

// Binary elementwise ops broadcast `b` over `a` when b has the same shape,
// is a 1 x cols row (broadcast over the leading axis), or is 1x1.
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);
Var Div(Var a, Var b);
Var Scale(Var a, double factor);

Var MatMul(Var a, Var b);
Var Transpose(Var a);

Var Relu(Var a);
Var Sigmoid(Var a);
Var Log1p(Var a);
// sign(x) * log1p(|x|)
Var SignedLog1p(Var a);
// x / (1 + |x|)
Var Softsign(Var a);
// Along the last axis (each row).
Var Softmax(Var a);

// Along the last axis.
Var Concat(const std::vector<Var>& parts);
// Rows (axis 0) or columns (axis 1) in [begin, end).
Var Slice(Var a, int axis, std::size_t begin, std::size_t end);

// axis 0 reduces rows to 1 x cols; axis 1 reduces columns to rows x 1.
Var Sum(Var a, int axis);
Var Mean(Var a, int axis);
Var SumAll(Var a);
Var MeanAll(Var a);

// Dense kernels shared with callers that need them outside a graph.
Tensor MatMulValues(const Tensor& a, const Tensor& b);
Tensor TransposeValues(const Tensor& a);

}  // namespace nfs::diff

#endif  // NFS_DIFFCORE_H_
