// Copyright 2026 The FORML Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "forml/matrix.hpp"

namespace forml::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Constant,
  MatMul,
  Transpose,
  Add,
  Sub,
  Scale,      // by a compile-time constant stored on the node
  Hadamard,
  Tanh,
  Relu,
  RowInvNorm,     // m x n -> m x 1, 1 / ||row||
  RowNormalize,   // rows scaled to unit l2 norm
  RowScale,       // (m x n, m x 1) -> row i scaled by s_i
  RowDot,         // (m x n, m x n) -> m x 1
  Softmax,        // row-wise
  SoftmaxCrossEntropy,  // (logits, labels) -> 1 x 1 mean over rows
  Mean,
  Sum,
  ScalarMul,  // (m x n, 1 x 1)
};

std::string_view op_name(OpKind kind);

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t index = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Gradients of a scalar with respect to every leaf of a tape.
class GradientMap {
 public:
  GradientMap() = default;
  explicit GradientMap(std::vector<std::optional<Matrix>> grads) : grads_(std::move(grads)) {}

  /// Zero matrix of the leaf's shape when the loss does not depend on it.
  Matrix at(Var leaf) const;
  bool contains(Var leaf) const;

 private:
  std::vector<std::optional<Matrix>> grads_;
};

/// Reverse-mode tape over matrix primitives.
///
/// Values are computed eagerly at record time. Vector-Jacobian rules are
/// themselves recorded with tape primitives, so grad(..., create_graph=true)
/// yields Vars that can be differentiated again; that is how the unrolled
/// Euclidean meta-gradient gets its second-order terms.
///
/// A Tape is single-owner; do not record on it from more than one thread.
class Tape {
 public:
  Var leaf(Matrix value);
  Var constant(Matrix value);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  OpKind kind(Var v) const { return nodes_.at(v.index).kind; }

  /// Replace the value of a leaf; call replay() to refresh dependents.
  void set_leaf_value(Var leaf, Matrix value);
  /// Recompute every non-leaf node from its inputs, in recording order.
  void replay();

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double c);
  Var hadamard(Var a, Var b);
  Var tanh(Var a);
  /// Subgradient at 0 is 0.
  Var relu(Var a);
  /// Each row must have norm > 1e-12, otherwise NumericError.
  Var row_inv_norm(Var a);
  Var row_l2_normalize(Var a);
  Var row_scale(Var a, Var s);
  Var row_dot(Var a, Var b);
  Var softmax(Var logits);
  /// Mean over rows of -log softmax(logits)_label.
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);
  Var mean(Var a);
  Var sum(Var a);
  Var scalar_mul(Var a, Var s);
  /// a + 1 * b for a (m x n) and row vector b (1 x n).
  Var add_row_broadcast(Var a, Var b);

  /// Vector-Jacobian product of `out` seeded with `seed` (same shape as out),
  /// returned for each Var in `wrt`. Inputs the output does not depend on get
  /// zeros. With create_graph the returned Vars live on this tape and can be
  /// differentiated again; otherwise the scratch nodes are dropped.
  std::vector<Var> grad(Var out, std::span<const Var> wrt, bool create_graph,
                        const std::optional<Matrix>& seed = std::nullopt);

  std::vector<Matrix> vjp(Var out, const Matrix& seed, std::span<const Var> wrt);

  /// d loss / d leaf for every leaf. `loss` must be 1 x 1.
  GradientMap backward(Var loss);

  /// Negative-control hook: multiply the vector-Jacobian rule of `kind` by
  /// `factor`. Used to show the gradient checks catch a broken primitive.
  void corrupt_vjp(OpKind kind, double factor) { corruption_ = {kind, factor}; }

 private:
  struct Node {
    OpKind kind;
    std::uint32_t in0 = 0, in1 = 0;
    std::uint8_t arity = 0;
    bool requires_grad = false;
    double scalar = 0.0;
    std::shared_ptr<const std::vector<int>> labels;
    Matrix value;
  };

  Var push(Node node);
  Matrix compute(const Node& node) const;
  void truncate(std::size_t n);
  void accumulate(std::vector<std::optional<Var>>& adj, std::uint32_t index, Var g);
  void propagate(std::uint32_t index, Var g, std::vector<std::optional<Var>>& adj);
  void check(Var v) const;

  std::vector<Node> nodes_;
  std::optional<std::pair<OpKind, double>> corruption_;
};

/// Builds a scalar loss from one leaf matrix.
using LeafLoss = std::function<Var(Tape&, Var)>;

/// Normwise relative error ||analytic - fd|| / max(||fd||, 1e-8), fd by
/// central differences with step h.
double gradient_check(const LeafLoss& f, const Matrix& point, double h = 1e-6);

/// Central finite-difference gradient of f at point.
Matrix finite_difference_gradient(const LeafLoss& f, const Matrix& point, double h = 1e-6);

}  // namespace forml::ad
