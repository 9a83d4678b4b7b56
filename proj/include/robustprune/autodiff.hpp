// Copyright 2026 The robustprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode automatic differentiation over batched tensors.
//
// A Graph records every operation applied to its Vars in creation order.
// Graph::backward(loss) walks the tape in reverse and accumulates
// d(loss)/d(node) for every node that depends on a gradient-requiring leaf.
// Parameter leaves created with Graph::parameter() push their final gradient
// into the bound Tensor's gradient slot, so one graph per minibatch is the
// intended usage pattern.

#ifndef ROBUSTPRUNE_AUTODIFF_HPP_
#define ROBUSTPRUNE_AUTODIFF_HPP_

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robustprune/tensor.hpp"

namespace robustprune::ad {

class Graph;

// Lightweight handle to a node of a Graph.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  // Gradient of the last backward() target; empty when not computed.
  std::span<const double> grad() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Propagates the node's gradient into its parents.
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf without gradient. The value is copied.
  Var constant(Tensor value);
  // Leaf without gradient that references `value`; it must outlive the graph.
  Var constant_ref(const Tensor& value);
  // Leaf whose gradient is read back through Var::grad().
  Var variable(Tensor value);
  // Leaf referencing `tensor`; backward() adds the gradient into tensor.grad().
  Var parameter(Tensor& tensor);

  // Records an operation. Rejects non-finite results naming `op`.
  Var emit(const char* op, Tensor value, std::span<const Var> parents, BackwardFn backward);

  // Runs reverse accumulation from a single-element node.
  void backward(Var loss);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a gradient-requiring node, allocated on first use.
  // Returns nullptr when the node does not require a gradient.
  double* grad_target(std::size_t id);
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor* sink = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    const char* op = "";
  };

  Var push(Node node);

  std::deque<Node> nodes_;
};

// Square-kernel 2-D convolution geometry with symmetric zero padding.
struct ConvGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;

  // Output spatial extent for an input extent; throws ShapeError when the
  // kernel does not fit.
  std::size_t output_extent(std::size_t input) const;
  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

// y = x W^T + b for x [B, in], W [out, in], b [out].
Var linear(Var x, Var w, std::optional<Var> b = std::nullopt);
// x [B, C, H, W], w [O, C, k, k], b [O] -> [B, O, Ho, Wo].
Var conv2d(Var x, Var w, std::optional<Var> b, const ConvGeometry& geometry);
// Subgradient at 0 is 0.
Var relu(Var x);
// Subgradient at 0 is 0.
Var abs(Var x);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var reshape(Var x, Shape shape);
// Keeps the leading (batch) dimension, flattens the rest.
Var flatten(Var x);
Var sum(Var x);

// Mean softmax cross-entropy of logits [B, C] against class labels.
Var cross_entropy(Var logits, std::span<const int> labels);
// 0.5 * sum((out - target)^2) / B.
Var squared_error(Var out, const Tensor& target);
// Row-wise pick: column labels[b] from `on_label`, every other column from
// `off_label`. Both [B, C].
Var select_by_label(Var on_label, Var off_label, std::span<const int> labels);

// theta * mask with the mask held constant.
Var masked(Var theta, const Tensor& mask);
// Effective weight theta * mask with the straight-through rule for scores:
// d/d(scores) := theta * d/d(weight), d/d(theta) := mask * d/d(weight).
// `scores` has theta's shape.
Var straight_through(Var theta, Var scores, const Tensor& mask);
// Filter-granularity variant: one score and one mask entry per leading index
// of theta; the score gradient is summed over the filter.
Var straight_through_filters(Var theta, Var filter_scores, const Tensor& filter_mask);

}  // namespace robustprune::ad

#endif  // ROBUSTPRUNE_AUTODIFF_HPP_
