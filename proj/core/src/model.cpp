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

#include "forml/model.hpp"

#include <cmath>
#include <string>

#include "forml/errors.hpp"

namespace forml::model {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

std::size_t ModelParams::input_dim() const {
  return backbone.empty() ? head.n() : backbone.front().weight.rows();
}

void ModelParams::validate() const {
  std::size_t width = input_dim();
  for (std::size_t i = 0; i < backbone.size(); ++i) {
    const DenseLayer& l = backbone[i];
    if (l.weight.rows() != width || l.bias.rows() != 1 || l.bias.cols() != l.weight.cols()) {
      throw ShapeError("ModelParams: layer " + std::to_string(i) + " has weight " +
                       l.weight.shape_string() + " and bias " + l.bias.shape_string());
    }
    width = l.weight.cols();
  }
  if (head.n() != width) {
    throw ShapeError("ModelParams: head has " + std::to_string(head.n()) +
                     " rows but the backbone emits " + std::to_string(width) + " features");
  }
  if (head.n() < head.p()) throw ShapeError("ModelParams: feature dim smaller than class count");
  if (!(logit_scale > 0.0)) throw PreconditionError("ModelParams: logit_scale must be positive");
}

void Batch::validate() const {
  if (labels.size() != features.rows()) {
    throw ShapeError("Batch: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(features.rows()) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw PreconditionError("Batch: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
  }
}

ModelParams init_params(std::span<const std::size_t> layer_dims, std::size_t num_classes,
                        Activation activation, double logit_scale, std::uint64_t seed) {
  if (layer_dims.empty()) throw ShapeError("init_params: need at least the input dimension");
  const std::size_t d = layer_dims.back();
  if (d < num_classes) {
    throw ShapeError("init_params: feature dim " + std::to_string(d) + " < class count " +
                     std::to_string(num_classes));
  }
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const std::size_t fan_in = layer_dims[i], fan_out = layer_dims[i + 1];
    Matrix w(fan_in, fan_out);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w.data()) v = stddev * rng.normal();
    layers.push_back({std::move(w), Matrix(1, fan_out), activation});
  }
  ModelParams p{std::move(layers), manifold::random_point(d, num_classes, rng), logit_scale};
  p.validate();
  return p;
}

ParamVars bind(ad::Tape& tape, const ModelParams& params) {
  ParamVars vars;
  vars.layers.reserve(params.backbone.size());
  for (const DenseLayer& l : params.backbone) {
    const ad::Var w = tape.leaf(l.weight);
    const ad::Var b = tape.leaf(l.bias);
    vars.layers.emplace_back(w, b);
  }
  vars.head = tape.leaf(params.head.value());
  return vars;
}

ad::Var forward(ad::Tape& tape, const ModelParams& arch, const ParamVars& vars, const Batch& batch) {
  if (vars.layers.size() != arch.backbone.size()) {
    throw ShapeError("forward: parameter handles do not match the architecture");
  }
  ad::Var h = tape.constant(batch.features);
  for (std::size_t i = 0; i < vars.layers.size(); ++i) {
    h = tape.add_row_broadcast(tape.matmul(h, vars.layers[i].first), vars.layers[i].second);
    switch (arch.backbone[i].activation) {
      case Activation::Tanh: h = tape.tanh(h); break;
      case Activation::Relu: h = tape.relu(h); break;
      case Activation::Identity: break;
    }
  }
  const ad::Var normalized = tape.row_l2_normalize(h);
  return tape.scale(tape.matmul(normalized, vars.head), arch.logit_scale);
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("accuracy: label count mismatch");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    if (static_cast<int>(best) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

LossAndAccuracy episode_loss(ad::Tape& tape, const ModelParams& arch, const ParamVars& vars,
                             const Batch& batch) {
  const ad::Var logits = forward(tape, arch, vars, batch);
  return {tape.softmax_cross_entropy(logits, batch.labels), accuracy(tape.value(logits), batch.labels)};
}

double evaluate_accuracy(const ModelParams& params, const Batch& batch) {
  ad::Tape tape;
  const ParamVars vars = bind(tape, params);
  return accuracy(tape.value(forward(tape, params, vars, batch)), batch.labels);
}

}  // namespace forml::model
