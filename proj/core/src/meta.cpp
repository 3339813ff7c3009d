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

#include "forml/meta.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "forml/linalg.hpp"

namespace forml::meta {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<ad::Var> flat_vars(const model::ParamVars& vars) {
  std::vector<ad::Var> out;
  for (const auto& [w, b] : vars.layers) {
    out.push_back(w);
    out.push_back(b);
  }
  out.push_back(vars.head);
  return out;
}

model::ParamVars unflatten_vars(std::span<const ad::Var> flat) {
  model::ParamVars vars;
  const std::size_t layers = (flat.size() - 1) / 2;
  for (std::size_t i = 0; i < layers; ++i) vars.layers.emplace_back(flat[2 * i], flat[2 * i + 1]);
  vars.head = flat.back();
  return vars;
}

Gradients from_gradient_map(const ad::GradientMap& g, const model::ParamVars& vars) {
  Gradients out;
  for (const auto& [w, b] : vars.layers) {
    out.weights.push_back(g.at(w));
    out.biases.push_back(g.at(b));
  }
  out.head = g.at(vars.head);
  return out;
}

void require_finite_loss(double v, const char* where) {
  if (!std::isfinite(v)) throw NumericError(std::string(where) + ": non-finite loss");
}

}  // namespace

Gradients Gradients::zeros_like(const ModelParams& params) {
  Gradients g;
  for (const auto& l : params.backbone) {
    g.weights.emplace_back(l.weight.rows(), l.weight.cols());
    g.biases.emplace_back(l.bias.rows(), l.bias.cols());
  }
  g.head = Matrix(params.head.n(), params.head.p());
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (weights.size() != other.weights.size()) throw ShapeError("Gradients: layer count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
  head += other.head;
  return *this;
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for (const Matrix& w : weights) out.insert(out.end(), w.data().begin(), w.data().end());
  for (const Matrix& b : biases) out.insert(out.end(), b.data().begin(), b.data().end());
  out.insert(out.end(), head.data().begin(), head.data().end());
  return out;
}

double relative_error(const Gradients& a, const Gradients& b) {
  const auto x = a.flatten(), y = b.flatten();
  if (x.size() != y.size()) throw ShapeError("relative_error: gradient layouts differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - y[i]) * (x[i] - y[i]);
    den += y[i] * y[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::sqrt(num);
  return std::sqrt(num / den);
}

double max_abs_difference(const Gradients& a, const Gradients& b) {
  const auto x = a.flatten(), y = b.flatten();
  if (x.size() != y.size()) throw ShapeError("max_abs_difference: gradient layouts differ");
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(x[i] - y[i]));
  return m;
}

TaskLosses classification_losses(const ModelParams& arch, const tasks::Episode& episode) {
  // Shared so the builders stay cheap to copy.
  auto model = std::make_shared<const ModelParams>(arch);
  auto support = std::make_shared<const model::Batch>(episode.support);
  auto query = std::make_shared<const model::Batch>(episode.query);
  return {
      [model, support](ad::Tape& t, const model::ParamVars& v) {
        return model::episode_loss(t, *model, v, *support).loss;
      },
      [model, query](ad::Tape& t, const model::ParamVars& v) {
        return model::episode_loss(t, *model, v, *query).loss;
      },
  };
}

TaskLosses linear_head_losses(const Matrix& c_support, const Matrix& c_query) {
  auto linear = [](Matrix c) {
    return [c = std::move(c)](ad::Tape& t, const model::ParamVars& v) {
      return t.sum(t.hadamard(t.constant(c), v.head));
    };
  };
  return {linear(c_support), linear(c_query)};
}

void Hyper::validate() const {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  if (!(beta_stiefel > 0.0) || !(beta_euclid > 0.0)) throw ConfigError("outer step sizes must be positive");
  if (inner_steps < 1) throw ConfigError("inner_steps must be at least 1");
  if (batch_tasks < 1) throw ConfigError("batch_tasks must be at least 1");
  if (!(weight_decay_euclid >= 0.0)) throw ConfigError("weight_decay must be non-negative");
}

InnerTrajectory inner_adapt(const ModelParams& theta, const LossBuilder& support, double alpha,
                            int steps, ManifoldKind head_manifold) {
  if (steps < 1) throw PreconditionError("inner_adapt: need at least one step");
  InnerTrajectory traj;
  traj.snapshots.reserve(static_cast<std::size_t>(steps) + 1);
  traj.snapshots.push_back(theta);
  for (int l = 1; l <= steps; ++l) {
    const ModelParams& phi = traj.snapshots.back();
    ad::Tape tape;
    const model::ParamVars vars = model::bind(tape, phi);
    const ad::Var loss = support(tape, vars);
    const double loss_value = tape.scalar(loss);
    require_finite_loss(loss_value, "inner_adapt");
    Gradients g = from_gradient_map(tape.backward(loss), vars);

    ModelParams next = phi;
    for (std::size_t i = 0; i < next.backbone.size(); ++i) {
      next.backbone[i].weight -= alpha * g.weights[i];
      next.backbone[i].bias -= alpha * g.biases[i];
    }
    const Matrix step = head_manifold.project(phi.head.value(), -alpha * g.head);
    try {
      next.head = head_manifold.make_point(head_manifold.retract(phi.head.value(), step));
    } catch (const NumericError& e) {
      throw NumericError("inner_adapt step " + std::to_string(l) + ": " + e.what());
    }
    traj.support_losses.push_back(loss_value);
    traj.support_grads.push_back(std::move(g));
    traj.snapshots.push_back(std::move(next));
  }
  return traj;
}

Matrix first_order_factor(const Matrix& phi, const Matrix& g_support, double alpha) {
  require_same_shape(phi, g_support, "first_order_factor");
  const Matrix a = matmul(phi.transpose(), g_support);  // p x p
  const Matrix b = matmul(phi, g_support.transpose());  // n x n
  Matrix h = Matrix::identity(phi.size());
  h -= (0.5 * alpha) * kron_sum(a, b);
  return h;
}

Matrix apply_factor_fast(const Matrix& g_query, const Matrix& phi, const Matrix& g_support,
                         double alpha) {
  require_same_shape(g_query, phi, "apply_factor_fast");
  require_same_shape(g_support, phi, "apply_factor_fast");
  const Matrix phit = phi.transpose();
  // G_s Phi^T G_q grouped as G_s (Phi^T G_q) keeps every product at n x p x p.
  Matrix correction = matmul(g_query, matmul(phit, g_support));
  correction += matmul(g_support, matmul(phit, g_query));
  return g_query - (0.5 * alpha) * correction;
}

MetaGradient query_gradient(const ModelParams& params, const LossBuilder& query) {
  ad::Tape tape;
  const model::ParamVars vars = model::bind(tape, params);
  const ad::Var loss = query(tape, vars);
  MetaGradient out;
  out.query_loss = tape.scalar(loss);
  out.grads = from_gradient_map(tape.backward(loss), vars);
  return out;
}

MetaGradient fomaml_meta_gradient(const InnerTrajectory& trajectory, const LossBuilder& query) {
  return query_gradient(trajectory.adapted(), query);
}

MetaGradient forml_meta_gradient(const InnerTrajectory& trajectory, const LossBuilder& query,
                                 double alpha, ManifoldKind head_manifold) {
  if (trajectory.steps() < 1) throw PreconditionError("forml_meta_gradient: empty trajectory");
  MetaGradient out = query_gradient(trajectory.adapted(), query);
  if (!head_manifold.is_stiefel()) return out;
  // Reverse chain order: the factor of the last inner step touches the
  // query cotangent first.
  for (int l = trajectory.steps(); l >= 1; --l) {
    const auto idx = static_cast<std::size_t>(l - 1);
    out.grads.head = apply_factor_fast(out.grads.head, trajectory.snapshots[idx].head.value(),
                                       trajectory.support_grads[idx].head, alpha);
  }
  return out;
}

double meta_objective(const ModelParams& theta, const TaskLosses& losses, double alpha, int steps,
                      ManifoldKind head_manifold) {
  const InnerTrajectory traj = inner_adapt(theta, losses.support, alpha, steps, head_manifold);
  ad::Tape tape;
  const model::ParamVars vars = model::bind(tape, traj.adapted());
  return tape.scalar(losses.query(tape, vars));
}

Gradients fd_meta_gradient(const ModelParams& theta, const TaskLosses& losses, double alpha,
                           int steps, ManifoldKind head_manifold, double h) {
  if (!(h > 0.0)) throw PreconditionError("fd_meta_gradient: step must be positive");
  Gradients g = Gradients::zeros_like(theta);
  ModelParams probe = theta;
  probe.head = manifold::StiefelPoint::relaxed(theta.head.value());

  auto central = [&](auto&& entry) {
    const double orig = entry();
    entry() = orig + h;
    const double fp = meta_objective(probe, losses, alpha, steps, head_manifold);
    entry() = orig - h;
    const double fm = meta_objective(probe, losses, alpha, steps, head_manifold);
    entry() = orig;
    return (fp - fm) / (2.0 * h);
  };

  for (std::size_t i = 0; i < probe.backbone.size(); ++i) {
    for (std::size_t k = 0; k < probe.backbone[i].weight.size(); ++k)
      g.weights[i].data()[k] = central([&]() -> double& { return probe.backbone[i].weight.data()[k]; });
    for (std::size_t k = 0; k < probe.backbone[i].bias.size(); ++k)
      g.biases[i].data()[k] = central([&]() -> double& { return probe.backbone[i].bias.data()[k]; });
  }
  Matrix head = theta.head.value();
  for (std::size_t k = 0; k < head.size(); ++k) {
    const double orig = head.data()[k];
    head.data()[k] = orig + h;
    probe.head = manifold::StiefelPoint::relaxed(head);
    const double fp = meta_objective(probe, losses, alpha, steps, head_manifold);
    head.data()[k] = orig - h;
    probe.head = manifold::StiefelPoint::relaxed(head);
    const double fm = meta_objective(probe, losses, alpha, steps, head_manifold);
    head.data()[k] = orig;
    g.head.data()[k] = (fp - fm) / (2.0 * h);
  }
  return g;
}

MetaGradient exact_unrolled_euclid(const ModelParams& theta, const TaskLosses& losses,
                                   double alpha, int steps) {
  if (steps < 1) throw PreconditionError("exact_unrolled_euclid: need at least one step");
  ad::Tape tape;
  const model::ParamVars leaves = model::bind(tape, theta);
  std::vector<ad::Var> current = flat_vars(leaves);
  for (int l = 0; l < steps; ++l) {
    const ad::Var loss = losses.support(tape, unflatten_vars(current));
    require_finite_loss(tape.scalar(loss), "exact_unrolled_euclid");
    const std::vector<ad::Var> g = tape.grad(loss, current, /*create_graph=*/true);
    for (std::size_t i = 0; i < current.size(); ++i)
      current[i] = tape.sub(current[i], tape.scale(g[i], alpha));
  }
  const ad::Var query = losses.query(tape, unflatten_vars(current));
  MetaGradient out;
  out.query_loss = tape.scalar(query);
  out.grads = from_gradient_map(tape.backward(query), leaves);
  return out;
}

MetaState outer_update(const MetaState& state, std::span<const Gradients> task_grads,
                       ManifoldKind head_manifold) {
  if (task_grads.empty()) throw PreconditionError("outer_update: no task gradients");
  const ModelParams& theta = state.theta;
  const Hyper& hp = state.hyper;
  MetaState next = state;

  Matrix direction(theta.head.n(), theta.head.p());
  for (const Gradients& g : task_grads) direction += head_manifold.project(theta.head.value(), g.head);
  const Matrix step = -hp.beta_stiefel * direction;
  if (head_manifold.is_stiefel()) {
    next.theta.head = manifold::StiefelPoint(
        manifold::retract_matrix(theta.head.value(), step, manifold::RetractionMode::Polar));
  } else {
    next.theta.head = manifold::StiefelPoint::relaxed(theta.head.value() + step);
  }

  for (std::size_t i = 0; i < theta.backbone.size(); ++i) {
    Matrix gw = hp.weight_decay_euclid * theta.backbone[i].weight;
    Matrix gb = hp.weight_decay_euclid * theta.backbone[i].bias;
    for (const Gradients& g : task_grads) {
      gw += g.weights[i];
      gb += g.biases[i];
    }
    next.theta.backbone[i].weight -= hp.beta_euclid * gw;
    next.theta.backbone[i].bias -= hp.beta_euclid * gb;
  }
  return next;
}

std::string_view to_string(Engine e) {
  switch (e) {
    case Engine::Forml: return "FORML";
    case Engine::Fomaml: return "FOMAML";
    case Engine::ExactEuclid: return "EXACT_EUCLID";
    case Engine::FdRmaml: return "FD_RMAML";
  }
  return "unknown";
}

ManifoldKind engine_manifold(Engine engine, ManifoldKind configured) {
  return engine == Engine::ExactEuclid ? ManifoldKind::euclid() : configured;
}

tasks::Episode TaskSource::sample(Rng& rng) const {
  if (bank == nullptr) throw PreconditionError("TaskSource: no bank");
  return tasks::sample_episode(*bank, ways, shots, queries, rng);
}

TrainResult meta_train(MetaState state, const TaskSource& source, const TrainOptions& options,
                       const IterationCallback& on_iteration) {
  if (options.outer_iters < 1) throw PreconditionError("meta_train: outer_iters must be >= 1");
  state.hyper.validate();
  state.theta.validate();
  const Hyper& hp = state.hyper;
  const ManifoldKind head_manifold = engine_manifold(options.engine, options.manifold);

  std::vector<MetricsRecord> history;
  history.reserve(static_cast<std::size_t>(options.outer_iters));
  for (int t = 0; t < options.outer_iters; ++t) {
    MetricsRecord rec;
    rec.iteration = t + 1;
    std::vector<Gradients> grads;
    grads.reserve(static_cast<std::size_t>(hp.batch_tasks));
    double loss_sum = 0.0, acc_sum = 0.0;

    try {
      for (int i = 0; i < hp.batch_tasks; ++i) {
        Rng rng = Rng::substream(
            {options.seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(i)});
        const tasks::Episode episode = source.sample(rng);
        const TaskLosses losses = classification_losses(state.theta, episode);

        auto start = Clock::now();
        const InnerTrajectory traj =
            inner_adapt(state.theta, losses.support, hp.alpha, hp.inner_steps, head_manifold);
        rec.inner_time_s += seconds_since(start);

        start = Clock::now();
        MetaGradient mg;
        switch (options.engine) {
          case Engine::Forml:
            mg = forml_meta_gradient(traj, losses.query, hp.alpha, head_manifold);
            break;
          case Engine::Fomaml:
            mg = fomaml_meta_gradient(traj, losses.query);
            break;
          case Engine::ExactEuclid:
            mg = exact_unrolled_euclid(state.theta, losses, hp.alpha, hp.inner_steps);
            break;
          case Engine::FdRmaml:
            mg.grads = fd_meta_gradient(state.theta, losses, hp.alpha, hp.inner_steps, head_manifold,
                                        options.fd_step);
            mg.query_loss = query_gradient(traj.adapted(), losses.query).query_loss;
            break;
        }
        rec.outer_time_s += seconds_since(start);

        loss_sum += mg.query_loss;
        acc_sum += model::evaluate_accuracy(traj.adapted(), episode.query);
        grads.push_back(std::move(mg.grads));
      }
    } catch (const NumericError& e) {
      throw TrainingAborted("meta_train: iteration " + std::to_string(rec.iteration) + ": " + e.what(),
                            rec.iteration, std::move(history));
    }

    rec.meta_loss = loss_sum / hp.batch_tasks;
    rec.query_accuracy = acc_sum / hp.batch_tasks;
    if (!std::isfinite(rec.meta_loss)) {
      throw TrainingAborted("meta_train: non-finite meta-loss at iteration " + std::to_string(rec.iteration),
                            rec.iteration, std::move(history));
    }

    const auto start = Clock::now();
    state = outer_update(state, grads, head_manifold);
    rec.outer_time_s += seconds_since(start);
    rec.head_orthonormality_residual = manifold::orthonormality_residual(state.theta.head.value());

    history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }
  return TrainResult{std::move(state), std::move(history)};
}

double confidence_interval95(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw PreconditionError("confidence_interval95: need at least two values");
  if (std::ranges::all_of(values, [&](double v) { return v == values.front(); })) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return 1.96 * sd / std::sqrt(static_cast<double>(n));
}

EvalResult meta_evaluate(const MetaState& state, const TaskSource& source, int episodes,
                         double alpha, int steps, ManifoldKind head_manifold, Rng& rng) {
  if (episodes < 2) throw PreconditionError("meta_evaluate: need at least two episodes");
  EvalResult out;
  out.accuracies.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const tasks::Episode episode = source.sample(rng);
    const TaskLosses losses = classification_losses(state.theta, episode);
    const InnerTrajectory traj = inner_adapt(state.theta, losses.support, alpha, steps, head_manifold);
    out.accuracies.push_back(model::evaluate_accuracy(traj.adapted(), episode.query));
  }
  double sum = 0.0;
  for (double a : out.accuracies) sum += a;
  out.mean_accuracy = sum / static_cast<double>(episodes);
  out.ci95 = confidence_interval95(out.accuracies);
  return out;
}

}  // namespace forml::meta
