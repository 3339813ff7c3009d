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

#include "forml/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "forml/errors.hpp"

namespace forml::ad {

namespace {

constexpr double kMinRowNorm = 1e-12;

Matrix softmax_rows(const Matrix& z) {
  Matrix y(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) total += (y(i, j) = std::exp(z(i, j) - mx));
    for (std::size_t j = 0; j < z.cols(); ++j) y(i, j) /= total;
  }
  return y;
}

Matrix row_scaled(const Matrix& a, const Matrix& s) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= s(i, 0);
  return out;
}

void require_shape(bool ok, const char* op, const Var& a, const Var& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": (" + std::to_string(a.rows) + "x" +
                     std::to_string(a.cols) + ") vs (" + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + ")");
  }
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Transpose: return "transpose";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "subtract";
    case OpKind::Scale: return "scale";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::RowInvNorm: return "row-inv-norm";
    case OpKind::RowNormalize: return "row-l2-normalize";
    case OpKind::RowScale: return "row-scale";
    case OpKind::RowDot: return "row-dot";
    case OpKind::Softmax: return "softmax";
    case OpKind::SoftmaxCrossEntropy: return "softmax-cross-entropy";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::ScalarMul: return "scalar-mul";
  }
  return "unknown";
}

Matrix GradientMap::at(Var leaf) const {
  if (contains(leaf)) return *grads_[leaf.index];
  return Matrix(leaf.rows, leaf.cols);
}

bool GradientMap::contains(Var leaf) const {
  return leaf.index < grads_.size() && grads_[leaf.index].has_value();
}

void Tape::check(Var v) const {
  if (v.index >= nodes_.size()) throw PreconditionError("Tape: Var does not belong to this tape");
}

const Matrix& Tape::value(Var v) const {
  check(v);
  return nodes_[v.index].value;
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw ShapeError("Tape::scalar: value is " + m.shape_string());
  return m(0, 0);
}

Var Tape::push(Node node) {
  if (node.kind != OpKind::Leaf && node.kind != OpKind::Constant) node.value = compute(node);
  Var v{static_cast<std::uint32_t>(nodes_.size()), node.value.rows(), node.value.cols()};
  nodes_.push_back(std::move(node));
  return v;
}

Var Tape::leaf(Matrix value) {
  Node n{OpKind::Leaf};
  n.requires_grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(Matrix value) {
  Node n{OpKind::Constant};
  n.value = std::move(value);
  return push(std::move(n));
}

void Tape::set_leaf_value(Var leaf, Matrix value) {
  check(leaf);
  Node& n = nodes_[leaf.index];
  if (n.kind != OpKind::Leaf) throw PreconditionError("set_leaf_value: not a leaf");
  require_same_shape(n.value, value, "set_leaf_value");
  n.value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_)
    if (n.kind != OpKind::Leaf && n.kind != OpKind::Constant) n.value = compute(n);
}

void Tape::truncate(std::size_t n) { nodes_.resize(n); }

Matrix Tape::compute(const Node& n) const {
  const Matrix& a = nodes_[n.in0].value;
  const Matrix& b = nodes_[n.arity > 1 ? n.in1 : n.in0].value;
  switch (n.kind) {
    case OpKind::Leaf:
    case OpKind::Constant:
      return n.value;
    case OpKind::MatMul: return forml::matmul(a, b);
    case OpKind::Transpose: return a.transpose();
    case OpKind::Add: return a + b;
    case OpKind::Sub: return a - b;
    case OpKind::Scale: return a * n.scalar;
    case OpKind::Hadamard: return forml::hadamard(a, b);
    case OpKind::Tanh: {
      Matrix y = a;
      for (double& v : y.data()) v = std::tanh(v);
      return y;
    }
    case OpKind::Relu: {
      Matrix y = a;
      for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case OpKind::RowInvNorm: {
      Matrix r(a.rows(), 1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (double v : a.row(i)) s += v * v;
        const double norm = std::sqrt(s);
        if (!(norm > kMinRowNorm)) {
          throw NumericError("row-l2-normalize: row " + std::to_string(i) + " has zero norm");
        }
        r(i, 0) = 1.0 / norm;
      }
      return r;
    }
    case OpKind::RowNormalize:
    case OpKind::RowScale:
      return row_scaled(a, b);
    case OpKind::RowDot: {
      Matrix r(a.rows(), 1);
      for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * b(i, j);
        r(i, 0) = s;
      }
      return r;
    }
    case OpKind::Softmax: return softmax_rows(a);
    case OpKind::SoftmaxCrossEntropy: {
      const auto& labels = *n.labels;
      double total = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) {
        auto row = a.row(i);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        total += mx + std::log(z) - a(i, static_cast<std::size_t>(labels[i]));
      }
      return Matrix(1, 1, total / static_cast<double>(a.rows()));
    }
    case OpKind::Mean:
    case OpKind::Sum: {
      double s = 0.0;
      for (double v : a.data()) s += v;
      if (n.kind == OpKind::Mean) s /= static_cast<double>(a.size());
      return Matrix(1, 1, s);
    }
    case OpKind::ScalarMul: return a * b(0, 0);
  }
  throw PreconditionError("Tape: unknown op");
}

Var Tape::matmul(Var a, Var b) {
  check(a), check(b);
  require_shape(a.cols == b.rows, "matmul", a, b);
  Node n{OpKind::MatMul, a.index, b.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  check(a);
  Node n{OpKind::Transpose, a.index, a.index, 1};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  check(a), check(b);
  require_shape(a.rows == b.rows && a.cols == b.cols, "add", a, b);
  Node n{OpKind::Add, a.index, b.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  check(a), check(b);
  require_shape(a.rows == b.rows && a.cols == b.cols, "subtract", a, b);
  Node n{OpKind::Sub, a.index, b.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  check(a);
  Node n{OpKind::Scale, a.index, a.index, 1};
  n.scalar = c;
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  check(a), check(b);
  require_shape(a.rows == b.rows && a.cols == b.cols, "hadamard", a, b);
  Node n{OpKind::Hadamard, a.index, b.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::tanh(Var a) {
  check(a);
  Node n{OpKind::Tanh, a.index, a.index, 1};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::relu(Var a) {
  check(a);
  Node n{OpKind::Relu, a.index, a.index, 1};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::row_inv_norm(Var a) {
  check(a);
  Node n{OpKind::RowInvNorm, a.index, a.index, 1};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::row_l2_normalize(Var a) {
  // The inverse norms are kept as a second input so the backward rule can
  // reuse them; gradients flow only through the first input.
  const Var r = row_inv_norm(a);
  Node n{OpKind::RowNormalize, a.index, r.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::row_scale(Var a, Var s) {
  check(a), check(s);
  require_shape(s.rows == a.rows && s.cols == 1, "row-scale", a, s);
  Node n{OpKind::RowScale, a.index, s.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[s.index].requires_grad;
  return push(std::move(n));
}

Var Tape::row_dot(Var a, Var b) {
  check(a), check(b);
  require_shape(a.rows == b.rows && a.cols == b.cols, "row-dot", a, b);
  Node n{OpKind::RowDot, a.index, b.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[b.index].requires_grad;
  return push(std::move(n));
}

Var Tape::softmax(Var logits) {
  check(logits);
  Node n{OpKind::Softmax, logits.index, logits.index, 1};
  n.requires_grad = nodes_[logits.index].requires_grad;
  return push(std::move(n));
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  check(logits);
  if (labels.size() != logits.rows) {
    throw ShapeError("softmax-cross-entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.rows) + " rows");
  }
  if (logits.rows == 0) throw ShapeError("softmax-cross-entropy: empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols) {
      throw PreconditionError("softmax-cross-entropy: label " + std::to_string(y) +
                              " out of range for " + std::to_string(logits.cols) + " classes");
    }
  }
  Node n{OpKind::SoftmaxCrossEntropy, logits.index, logits.index, 1};
  n.labels = std::make_shared<const std::vector<int>>(labels.begin(), labels.end());
  n.requires_grad = nodes_[logits.index].requires_grad;
  return push(std::move(n));
}

Var Tape::mean(Var a) {
  check(a);
  Node n{OpKind::Mean, a.index, a.index, 1};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  check(a);
  Node n{OpKind::Sum, a.index, a.index, 1};
  n.requires_grad = nodes_[a.index].requires_grad;
  return push(std::move(n));
}

Var Tape::scalar_mul(Var a, Var s) {
  check(a), check(s);
  require_shape(s.rows == 1 && s.cols == 1, "scalar-mul", a, s);
  Node n{OpKind::ScalarMul, a.index, s.index, 2};
  n.requires_grad = nodes_[a.index].requires_grad || nodes_[s.index].requires_grad;
  return push(std::move(n));
}

Var Tape::add_row_broadcast(Var a, Var b) {
  check(a), check(b);
  require_shape(b.rows == 1 && b.cols == a.cols, "add-row-broadcast", a, b);
  return add(a, matmul(constant(Matrix::ones(a.rows, 1)), b));
}

void Tape::accumulate(std::vector<std::optional<Var>>& adj, std::uint32_t index, Var g) {
  if (!nodes_[index].requires_grad) return;
  adj[index] = adj[index] ? add(*adj[index], g) : g;
}

void Tape::propagate(std::uint32_t index, Var g, std::vector<std::optional<Var>>& adj) {
  // Copy what we need: recording below may reallocate nodes_.
  const OpKind kind = nodes_[index].kind;
  const std::uint32_t i0 = nodes_[index].in0, i1 = nodes_[index].in1;
  const double c = nodes_[index].scalar;
  const auto labels = nodes_[index].labels;
  const Var self{index, nodes_[index].value.rows(), nodes_[index].value.cols()};
  auto var = [&](std::uint32_t i) {
    return Var{i, nodes_[i].value.rows(), nodes_[i].value.cols()};
  };
  const bool corrupt = corruption_ && corruption_->first == kind;
  auto emit = [&](std::uint32_t target, Var contribution) {
    if (corrupt) contribution = scale(contribution, corruption_->second);
    accumulate(adj, target, contribution);
  };
  const Var a = var(i0), b = var(i1);
  const bool need_a = nodes_[i0].requires_grad, need_b = nodes_[i1].requires_grad;

  switch (kind) {
    case OpKind::Leaf:
    case OpKind::Constant:
      return;
    case OpKind::MatMul:
      if (need_a) emit(i0, matmul(g, transpose(b)));
      if (need_b) emit(i1, matmul(transpose(a), g));
      return;
    case OpKind::Transpose:
      emit(i0, transpose(g));
      return;
    case OpKind::Add:
      if (need_a) emit(i0, g);
      if (need_b) emit(i1, g);
      return;
    case OpKind::Sub:
      if (need_a) emit(i0, g);
      if (need_b) emit(i1, scale(g, -1.0));
      return;
    case OpKind::Scale:
      emit(i0, scale(g, c));
      return;
    case OpKind::Hadamard:
      if (need_a) emit(i0, hadamard(g, b));
      if (need_b) emit(i1, hadamard(g, a));
      return;
    case OpKind::Tanh:
      // (1 - y^2) g
      emit(i0, sub(g, hadamard(g, hadamard(self, self))));
      return;
    case OpKind::Relu: {
      Matrix mask = nodes_[i0].value;
      for (double& v : mask.data()) v = v > 0.0 ? 1.0 : 0.0;
      emit(i0, hadamard(g, constant(std::move(mask))));
      return;
    }
    case OpKind::RowInvNorm: {
      // d(1/||x||)/dx = -x / ||x||^3
      const Var r3 = hadamard(self, hadamard(self, self));
      emit(i0, scale(row_scale(a, hadamard(g, r3)), -1.0));
      return;
    }
    case OpKind::RowNormalize: {
      // (g - (g . y) y) / ||x|| with y the normalized row; b holds 1/||x||.
      const Var along = row_scale(self, row_dot(g, self));
      emit(i0, row_scale(sub(g, along), b));
      return;
    }
    case OpKind::RowScale:
      if (need_a) emit(i0, row_scale(g, b));
      if (need_b) emit(i1, row_dot(g, a));
      return;
    case OpKind::RowDot:
      if (need_a) emit(i0, row_scale(b, g));
      if (need_b) emit(i1, row_scale(a, g));
      return;
    case OpKind::Softmax: {
      const Var ones = constant(Matrix::ones(self.rows, self.cols));
      emit(i0, hadamard(self, sub(g, row_scale(ones, row_dot(g, self)))));
      return;
    }
    case OpKind::SoftmaxCrossEntropy: {
      Matrix onehot(a.rows, a.cols);
      for (std::size_t i = 0; i < a.rows; ++i) onehot(i, static_cast<std::size_t>((*labels)[i])) = 1.0;
      const Var residual = sub(softmax(a), constant(std::move(onehot)));
      emit(i0, scale(scalar_mul(residual, g), 1.0 / static_cast<double>(a.rows)));
      return;
    }
    case OpKind::Mean:
    case OpKind::Sum: {
      Var spread = scalar_mul(constant(Matrix::ones(a.rows, a.cols)), g);
      if (kind == OpKind::Mean) spread = scale(spread, 1.0 / static_cast<double>(a.rows * a.cols));
      emit(i0, spread);
      return;
    }
    case OpKind::ScalarMul:
      if (need_a) emit(i0, scalar_mul(g, b));
      if (need_b) emit(i1, sum(hadamard(g, a)));
      return;
  }
}

std::vector<Var> Tape::grad(Var out, std::span<const Var> wrt, bool create_graph,
                            const std::optional<Matrix>& seed) {
  check(out);
  for (Var w : wrt) check(w);
  Matrix seed_value = seed ? *seed : Matrix::ones(out.rows, out.cols);
  if (seed_value.rows() != out.rows || seed_value.cols() != out.cols) {
    throw ShapeError("grad: seed " + seed_value.shape_string() + " does not match output");
  }
  if (!seed && (out.rows != 1 || out.cols != 1)) {
    throw ShapeError("grad: output must be 1x1 without an explicit seed");
  }

  const std::size_t mark = nodes_.size();
  std::vector<std::optional<Var>> adj(out.index + 1);
  adj[out.index] = constant(std::move(seed_value));
  for (std::int64_t i = out.index; i >= 0; --i) {
    const auto idx = static_cast<std::uint32_t>(i);
    if (!adj[idx] || !nodes_[idx].requires_grad) continue;
    propagate(idx, *adj[idx], adj);
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (Var w : wrt) {
    if (w.index <= out.index && adj[w.index]) {
      result.push_back(*adj[w.index]);
    } else {
      result.push_back(constant(Matrix(w.rows, w.cols)));
    }
  }
  if (!create_graph) {
    // Materialize as constants below the mark so the scratch graph can go.
    std::vector<Matrix> values;
    for (Var r : result) values.push_back(nodes_[r.index].value);
    truncate(mark);
    result.clear();
    for (Matrix& v : values) result.push_back(constant(std::move(v)));
  }
  return result;
}

std::vector<Matrix> Tape::vjp(Var out, const Matrix& seed, std::span<const Var> wrt) {
  const std::size_t mark = nodes_.size();
  std::vector<Var> g = grad(out, wrt, false, seed);
  std::vector<Matrix> values;
  values.reserve(g.size());
  for (Var v : g) values.push_back(nodes_[v.index].value);
  truncate(mark);
  return values;
}

GradientMap Tape::backward(Var loss) {
  check(loss);
  if (loss.rows != 1 || loss.cols != 1) {
    throw ShapeError("backward: loss must be 1x1, got (" + std::to_string(loss.rows) + "x" +
                     std::to_string(loss.cols) + ")");
  }
  std::vector<Var> leaves;
  for (std::uint32_t i = 0; i <= loss.index; ++i)
    if (nodes_[i].kind == OpKind::Leaf)
      leaves.push_back({i, nodes_[i].value.rows(), nodes_[i].value.cols()});
  std::vector<Matrix> g = vjp(loss, Matrix(1, 1, 1.0), leaves);
  std::vector<std::optional<Matrix>> grads(nodes_.size());
  for (std::size_t k = 0; k < leaves.size(); ++k) grads[leaves[k].index] = std::move(g[k]);
  return GradientMap(std::move(grads));
}

Matrix finite_difference_gradient(const LeafLoss& f, const Matrix& point, double h) {
  Matrix g(point.rows(), point.cols());
  Matrix x = point;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x.data()[k];
    x.data()[k] = orig + h;
    Tape plus;
    const double fp = plus.scalar(f(plus, plus.leaf(x)));
    x.data()[k] = orig - h;
    Tape minus;
    const double fm = minus.scalar(f(minus, minus.leaf(x)));
    x.data()[k] = orig;
    g.data()[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double gradient_check(const LeafLoss& f, const Matrix& point, double h) {
  Tape tape;
  const Var x = tape.leaf(point);
  const Var loss = f(tape, x);
  const Matrix analytic = tape.backward(loss).at(x);
  const Matrix fd = finite_difference_gradient(f, point, h);
  return frobenius_norm(analytic - fd) / std::max(frobenius_norm(fd), 1e-8);
}

}  // namespace forml::ad
