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
#include <span>
#include <string_view>
#include <vector>

#include "forml/autodiff.hpp"
#include "forml/errors.hpp"
#include "forml/matrix.hpp"
#include "forml/model.hpp"
#include "forml/rng.hpp"
#include "forml/stiefel.hpp"
#include "forml/tasks.hpp"

namespace forml::meta {

using manifold::ManifoldKind;
using model::ModelParams;

/// One gradient matrix per parameter block of a ModelParams.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
  Matrix head;

  static Gradients zeros_like(const ModelParams& params);
  Gradients& operator+=(const Gradients& other);
  /// All entries in a fixed order: weights, biases, head (row-major each).
  std::vector<double> flatten() const;
};

/// ||a - b||_2 / ||b||_2 over all entries.
double relative_error(const Gradients& a, const Gradients& b);
/// Largest |a - b| over all entries.
double max_abs_difference(const Gradients& a, const Gradients& b);

/// Builds the scalar task loss for the parameters bound in `vars`.
using LossBuilder = std::function<ad::Var(ad::Tape&, const model::ParamVars&)>;

struct TaskLosses {
  LossBuilder support;
  LossBuilder query;
};

/// Softmax cross-entropy of the cosine classifier on the episode's support and
/// query sets. `arch` supplies activations and logit scale.
TaskLosses classification_losses(const ModelParams& arch, const tasks::Episode& episode);

/// Losses <c_support, head> and <c_query, head>; linear in the head and
/// independent of the backbone.
TaskLosses linear_head_losses(const Matrix& c_support, const Matrix& c_query);

struct Hyper {
  double alpha = 0.1;          // inner step size
  double beta_stiefel = 1e-3;  // outer step size for the head
  double beta_euclid = 1e-3;   // outer step size for the backbone
  int inner_steps = 5;
  int batch_tasks = 4;
  double weight_decay_euclid = 0.0;

  void validate() const;
};

struct MetaState {
  ModelParams theta;
  Hyper hyper;
};

/// Parameters after each inner step, and the support gradients that produced
/// them. snapshots[0] is theta; support_grads[l - 1] was taken at snapshots[l - 1].
struct InnerTrajectory {
  std::vector<ModelParams> snapshots;
  std::vector<Gradients> support_grads;
  std::vector<double> support_losses;

  const ModelParams& adapted() const { return snapshots.back(); }
  int steps() const { return static_cast<int>(support_grads.size()); }
};

/// k steps of task adaptation on the support loss. Head: Riemannian step
/// retract(Phi, project(Phi, -alpha G)); backbone: plain gradient descent.
InnerTrajectory inner_adapt(const ModelParams& theta, const LossBuilder& support, double alpha,
                            int steps, ManifoldKind head_manifold);

/// Explicit single-step Jacobian approximation
///   H' = I_np - alpha/2 * ((Phi^T G) (+) (Phi G^T)),
/// an np x np matrix acting on column-stacked vec(dPhi).
Matrix first_order_factor(const Matrix& phi, const Matrix& g_support, double alpha);

/// unvec(H'^T vec(G_q)) without forming H':
///   G_q - alpha/2 * (G_q (Phi^T G_s) + G_s (Phi^T G_q)).
Matrix apply_factor_fast(const Matrix& g_query, const Matrix& phi, const Matrix& g_support,
                         double alpha);

struct MetaGradient {
  Gradients grads;
  double query_loss = 0.0;
};

/// Gradient of the query loss at fixed parameters.
MetaGradient query_gradient(const ModelParams& params, const LossBuilder& query);

/// Hessian-free meta-gradient. The head cotangent is pulled back through
/// every inner step, l = k down to 1, by apply_factor_fast; backbone blocks
/// keep the first-order (identity) factor. With a Euclidean head the result
/// is exactly the FOMAML gradient.
MetaGradient forml_meta_gradient(const InnerTrajectory& trajectory, const LossBuilder& query,
                                 double alpha, ManifoldKind head_manifold);

/// Query gradient at the adapted parameters, no chain factors.
MetaGradient fomaml_meta_gradient(const InnerTrajectory& trajectory, const LossBuilder& query);

/// Query loss after adapting theta: the scalar whose gradient all engines approximate.
double meta_objective(const ModelParams& theta, const TaskLosses& losses, double alpha, int steps,
                      ManifoldKind head_manifold);

/// Central finite differences of meta_objective over every parameter entry,
/// including through the polar retraction. O(#params) adaptations; meant as
/// a test oracle for small models.
Gradients fd_meta_gradient(const ModelParams& theta, const TaskLosses& losses, double alpha,
                           int steps, ManifoldKind head_manifold, double h = 1e-6);

/// Exact second-order meta-gradient with every parameter treated as
/// Euclidean: the whole inner loop and the query loss are recorded on one
/// tape and differentiated end to end.
MetaGradient exact_unrolled_euclid(const ModelParams& theta, const TaskLosses& losses,
                                   double alpha, int steps);

/// Outer step on the summed task meta-gradients. The head moves along the
/// summed tangent projections and is retracted with the polar map (Stiefel)
/// or updated additively (Euclidean); backbone blocks take an SGD step with
/// weight decay.
MetaState outer_update(const MetaState& state, std::span<const Gradients> task_grads,
                       ManifoldKind head_manifold);

enum class Engine { Forml, Fomaml, ExactEuclid, FdRmaml };

std::string_view to_string(Engine e);

/// Manifold the engine runs the head on: EXACT_EUCLID is Euclidean throughout.
ManifoldKind engine_manifold(Engine engine, ManifoldKind configured);

struct MetricsRecord {
  int iteration = 0;
  double meta_loss = 0.0;
  double query_accuracy = 0.0;
  double inner_time_s = 0.0;
  double outer_time_s = 0.0;
  double head_orthonormality_residual = 0.0;
};

/// Episode source for one bank with a fixed N-way k-shot q-query shape.
struct TaskSource {
  const tasks::TaskBank* bank = nullptr;
  std::size_t ways = 5;
  std::size_t shots = 1;
  std::size_t queries = 15;

  tasks::Episode sample(Rng& rng) const;
};

struct TrainOptions {
  int outer_iters = 1;
  Engine engine = Engine::Forml;
  ManifoldKind manifold = ManifoldKind::stiefel();
  std::uint64_t seed = 1;
  double fd_step = 1e-6;
};

struct TrainResult {
  MetaState state;
  std::vector<MetricsRecord> history;
};

/// Raised when the meta-loss goes non-finite; carries the history so far.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, int iteration, std::vector<MetricsRecord> history)
      : NumericError(what), iteration_(iteration), history_(std::move(history)) {}
  int iteration() const noexcept { return iteration_; }
  const std::vector<MetricsRecord>& history() const noexcept { return history_; }

 private:
  int iteration_;
  std::vector<MetricsRecord> history_;
};

using IterationCallback = std::function<void(const MetricsRecord&)>;

/// Outer loop: per iteration sample batch_tasks episodes (task i of iteration
/// t uses the substream (seed, t, i)), adapt, take meta-gradients with the
/// selected engine, and apply one outer_update. Tasks are processed and summed
/// in index order.
TrainResult meta_train(MetaState state, const TaskSource& source, const TrainOptions& options,
                       const IterationCallback& on_iteration = {});

struct EvalResult {
  double mean_accuracy = 0.0;
  double ci95 = 0.0;
  std::vector<double> accuracies;
};

/// 1.96 * s / sqrt(n) with s the sample standard deviation.
double confidence_interval95(std::span<const double> values);

/// Adapts the current meta-parameters on each test episode's support set and
/// scores the query set.
EvalResult meta_evaluate(const MetaState& state, const TaskSource& source, int episodes,
                         double alpha, int steps, ManifoldKind head_manifold, Rng& rng);

}  // namespace forml::meta
