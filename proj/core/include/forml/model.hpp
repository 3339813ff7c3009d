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
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "forml/autodiff.hpp"
#include "forml/matrix.hpp"
#include "forml/rng.hpp"
#include "forml/stiefel.hpp"

namespace forml::model {

enum class Activation { Tanh, Relu, Identity };

std::string_view to_string(Activation a);

/// y = act(x W + b), W is fan_in x fan_out, b is 1 x fan_out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;
  Activation activation = Activation::Tanh;
};

/// Euclidean backbone followed by the cosine-similarity Stiefel head.
///
/// Logits are logit_scale * normalize_rows(features) * head, so with
/// orthonormal head columns every logit lies in [-logit_scale, logit_scale].
struct ModelParams {
  std::vector<DenseLayer> backbone;
  manifold::StiefelPoint head;
  double logit_scale = 10.0;

  std::size_t input_dim() const;
  std::size_t feature_dim() const { return head.n(); }
  std::size_t num_classes() const { return head.p(); }

  /// Throws on any broken invariant (dimension chain, d >= C, scale > 0).
  void validate() const;
};

struct Batch {
  Matrix features;          // m x input_dim
  std::vector<int> labels;  // m entries in [0, num_classes)
  std::size_t num_classes = 0;

  void validate() const;
};

/// Tape handles for every parameter block of a ModelParams.
struct ParamVars {
  std::vector<std::pair<ad::Var, ad::Var>> layers;  // (weight, bias)
  ad::Var head;
};

/// layer_dims = {input, hidden..., feature}; a single entry means an identity
/// backbone. Weights ~ N(0, 1/fan_in), zero biases, head = random Stiefel point.
ModelParams init_params(std::span<const std::size_t> layer_dims, std::size_t num_classes,
                        Activation activation, double logit_scale, std::uint64_t seed);

/// Registers every parameter of `params` as a leaf.
ParamVars bind(ad::Tape& tape, const ModelParams& params);

/// Logits for `batch` under the parameter Vars `vars`. `arch` supplies the
/// activations and logit scale; its numeric values are not read.
ad::Var forward(ad::Tape& tape, const ModelParams& arch, const ParamVars& vars, const Batch& batch);

struct LossAndAccuracy {
  ad::Var loss;
  double accuracy = 0.0;
};

/// Mean softmax cross-entropy and argmax accuracy.
LossAndAccuracy episode_loss(ad::Tape& tape, const ModelParams& arch, const ParamVars& vars,
                             const Batch& batch);

/// Fraction of rows whose argmax equals the label, ties to the lowest index.
double accuracy(const Matrix& logits, std::span<const int> labels);

/// Query accuracy of fixed parameters, evaluated on a throwaway tape.
double evaluate_accuracy(const ModelParams& params, const Batch& batch);

}  // namespace forml::model
