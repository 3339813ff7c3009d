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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "forml/errors.hpp"
#include "forml/harness/commands.hpp"
#include "forml/linalg.hpp"
#include "forml/meta.hpp"
#include "oracle_values.inc"
#include "test_util.hpp"

namespace forml::meta {
namespace {

using manifold::RetractionMode;
using testing::from_array;
using testing::matrices_near;
using testing::random_matrix;

const ManifoldKind kPolar = ManifoldKind::stiefel(RetractionMode::Polar);
const ManifoldKind kAdditive = ManifoldKind::stiefel(RetractionMode::Additive);
const ManifoldKind kEuclid = ManifoldKind::euclid();

// Same fixed model and episode as tests/oracle/derive_values.py.
ModelParams reference_model() {
  model::DenseLayer layer{Matrix{{0.5, -0.3, 0.2, 0.1}, {-0.4, 0.6, 0.3, -0.2}, {0.1, 0.2, -0.5, 0.7}},
                          Matrix{{0.05, -0.1, 0.0, 0.2}}, model::Activation::Tanh};
  const Matrix head = uf(Matrix{{1.0, 0.2}, {0.3, -0.8}, {-0.5, 0.4}, {0.2, 0.6}});
  return ModelParams{{layer}, manifold::StiefelPoint(head), 10.0};
}

tasks::Episode reference_episode() {
  tasks::Episode ep;
  ep.support = {Matrix{{1.0, 0.5, -0.2}, {-0.3, 0.8, 0.4}, {0.6, -0.7, 0.1}, {-0.9, -0.2, 0.5}}, {0, 1, 0, 1}, 2};
  ep.query = {Matrix{{0.7, 0.1, 0.3}, {-0.5, 0.9, -0.1}, {0.2, -0.4, 0.8}, {-0.6, 0.3, -0.7}}, {1, 1, 0, 0}, 2};
  ep.class_map = {0, 1};
  return ep;
}

ModelParams small_model(std::uint64_t seed) {
  const std::vector<std::size_t> dims{6, 4};
  return model::init_params(dims, 3, model::Activation::Tanh, 10.0, seed);
}

tasks::Episode small_episode(std::uint64_t seed) {
  const auto banks = tasks::make_bank(10, 6, 0.3, {0.6, 0.2, 0.2}, seed);
  Rng rng(seed);
  return tasks::sample_episode(banks.train, 3, 2, 3, rng);
}

TEST(Factor, MatchesReferenceValue) {
  const Matrix phi{{0.6, -0.1}, {0.2, 0.9}, {-0.7, 0.3}};
  const Matrix gs{{0.3, 0.5}, {-0.2, 0.1}, {0.4, -0.6}};
  const Matrix gq{{-0.5, 0.2}, {0.7, 0.3}, {0.1, -0.4}};
  const Matrix expected = from_array(3, 2, kFactorApplied);
  EXPECT_TRUE(matrices_near(apply_factor_fast(gq, phi, gs, 0.1), expected, 1e-15));
  const Matrix h = first_order_factor(phi, gs, 0.1);
  ASSERT_EQ(h.rows(), 6u);
  EXPECT_TRUE(matrices_near(unvec(h.transpose() * vec(gq), 3, 2), expected, 1e-15));
}

TEST(Factor, FastAndExplicitPathsAgreeProperty) {
  const auto r = harness::check_factor_equivalence({});
  EXPECT_TRUE(r.pass) << harness::format_check(r);
}

TEST(Factor, ZeroStepIsIdentity) {
  Rng rng(1);
  const Matrix phi = random_matrix(4, 2, rng), gs = random_matrix(4, 2, rng), gq = random_matrix(4, 2, rng);
  EXPECT_EQ(first_order_factor(phi, gs, 0.0), Matrix::identity(8));
  EXPECT_EQ(apply_factor_fast(gq, phi, gs, 0.0), gq);
  EXPECT_THROW(apply_factor_fast(gq, phi, Matrix(3, 2), 0.1), ShapeError);
}

TEST(InnerAdapt, EuclideanSingleStepIsGradientDescent) {
  const ModelParams theta = small_model(2);
  const auto losses = classification_losses(theta, small_episode(2));
  const auto traj = inner_adapt(theta, losses.support, 0.1, 1, kEuclid);
  ASSERT_EQ(traj.steps(), 1);
  ASSERT_EQ(traj.snapshots.size(), 2u);
  const MetaGradient g = query_gradient(theta, losses.support);
  EXPECT_EQ(traj.adapted().head.value(), theta.head.value() - 0.1 * g.grads.head);
  EXPECT_EQ(traj.adapted().backbone[0].weight, theta.backbone[0].weight - 0.1 * g.grads.weights[0]);
  EXPECT_EQ(traj.support_grads[0].head, g.grads.head);
}

TEST(InnerAdapt, PolarKeepsHeadOnManifold) {
  const ModelParams theta = small_model(3);
  const auto losses = classification_losses(theta, small_episode(3));
  const auto traj = inner_adapt(theta, losses.support, 0.5, 5, kPolar);
  for (const auto& snap : traj.snapshots) {
    EXPECT_LT(manifold::orthonormality_residual(snap.head.value()), 1e-12);
  }
  EXPECT_EQ(traj.support_losses.size(), 5u);
  EXPECT_THROW(inner_adapt(theta, losses.support, 0.1, 0, kPolar), PreconditionError);
}

TEST(ExactUnrolled, MatchesReferenceAutodiff) {
  const ModelParams theta = reference_model();
  const auto losses = classification_losses(theta, reference_episode());
  const MetaGradient g = exact_unrolled_euclid(theta, losses, 0.1, 2);
  EXPECT_TRUE(matrices_near(g.grads.weights[0], from_array(3, 4, kExactMetaGradW), 1e-10));
  EXPECT_TRUE(matrices_near(g.grads.biases[0], from_array(1, 4, kExactMetaGradB), 1e-10));
  EXPECT_TRUE(matrices_near(g.grads.head, from_array(4, 2, kExactMetaGradHead), 1e-10));
}

TEST(ExactUnrolled, SingleQueryStepEqualsQueryGradient) {
  // With alpha = 0 the adapted parameters equal theta.
  const ModelParams theta = reference_model();
  const auto losses = classification_losses(theta, reference_episode());
  const MetaGradient g = exact_unrolled_euclid(theta, losses, 0.0, 1);
  EXPECT_NEAR(g.query_loss, kQueryLoss[0], 1e-12);
  EXPECT_TRUE(matrices_near(g.grads.head, from_array(4, 2, kQueryGradHead), 1e-12));
}

TEST(ExactUnrolled, MatchesFiniteDifferenceOracle) {
  const auto r = harness::check_exact_vs_fd({});
  EXPECT_TRUE(r.pass) << harness::format_check(r);
}

TEST(FdOracle, MatchesClosedFormLinearLossMetaGradient) {
  const std::array<std::size_t, 1> dims{4};
  ModelParams theta = model::init_params(dims, 2, model::Activation::Identity, 1.0, 1);
  theta.head = manifold::StiefelPoint(from_array(4, 2, kLinearTheta));
  const Matrix cs{{0.4, -0.3}, {0.2, 0.5}, {-0.6, 0.1}, {0.3, 0.7}};
  const Matrix cq{{-0.2, 0.6}, {0.5, -0.1}, {0.3, 0.4}, {-0.7, 0.2}};
  const auto losses = linear_head_losses(cs, cq);
  const Gradients fd = fd_meta_gradient(theta, losses, 0.1, 1, kAdditive);
  EXPECT_TRUE(matrices_near(fd.head, from_array(4, 2, kLinearExactMetaGrad), 1e-8));

  // The implemented factor reproduces its own formula on the same inputs.
  const auto traj = inner_adapt(theta, losses.support, 0.1, 1, kAdditive);
  const MetaGradient forml = forml_meta_gradient(traj, losses.query, 0.1, kAdditive);
  EXPECT_TRUE(matrices_near(forml.grads.head, from_array(4, 2, kLinearFormlPrinted), 1e-14));
}

TEST(FdOracle, ClassificationQueryGradientAtZeroStep) {
  const ModelParams theta = small_model(4);
  const auto losses = classification_losses(theta, small_episode(4));
  const Gradients fd = fd_meta_gradient(theta, losses, 0.0, 1, kEuclid);
  const MetaGradient exact = query_gradient(theta, losses.query);
  EXPECT_LT(relative_error(fd, exact.grads), 1e-7);
}

TEST(Forml, EuclideanHeadReducesToFomamlExactly) {
  for (int k : {1, 3, 5}) {
    const ModelParams theta = small_model(10 + static_cast<std::uint64_t>(k));
    const auto losses = classification_losses(theta, small_episode(10 + static_cast<std::uint64_t>(k)));
    const auto traj = inner_adapt(theta, losses.support, 0.1, k, kEuclid);
    EXPECT_EQ(forml_meta_gradient(traj, losses.query, 0.1, kEuclid).grads.flatten(),
              fomaml_meta_gradient(traj, losses.query).grads.flatten());
  }
}

TEST(Forml, ZeroStepSizeEqualsFomaml) {
  const ModelParams theta = small_model(20);
  const auto losses = classification_losses(theta, small_episode(20));
  const auto traj = inner_adapt(theta, losses.support, 0.0, 3, kPolar);
  EXPECT_EQ(forml_meta_gradient(traj, losses.query, 0.0, kPolar).grads.flatten(),
            fomaml_meta_gradient(traj, losses.query).grads.flatten());
}

TEST(Forml, BackboneBlocksAreFirstOrder) {
  const ModelParams theta = small_model(21);
  const auto losses = classification_losses(theta, small_episode(21));
  const auto traj = inner_adapt(theta, losses.support, 0.1, 3, kPolar);
  const auto forml = forml_meta_gradient(traj, losses.query, 0.1, kPolar);
  const auto fomaml = fomaml_meta_gradient(traj, losses.query);
  EXPECT_EQ(forml.grads.weights[0], fomaml.grads.weights[0]);
  EXPECT_EQ(forml.grads.biases[0], fomaml.grads.biases[0]);
  EXPECT_NE(forml.grads.head, fomaml.grads.head);
}

TEST(Forml, FactorsApplyLastStepFirst) {
  const ModelParams theta = small_model(22);
  const auto losses = classification_losses(theta, small_episode(22));
  const auto traj = inner_adapt(theta, losses.support, 0.3, 2, kPolar);
  Matrix g = query_gradient(traj.adapted(), losses.query).grads.head;
  g = apply_factor_fast(g, traj.snapshots[1].head.value(), traj.support_grads[1].head, 0.3);
  g = apply_factor_fast(g, traj.snapshots[0].head.value(), traj.support_grads[0].head, 0.3);
  EXPECT_EQ(forml_meta_gradient(traj, losses.query, 0.3, kPolar).grads.head, g);
}

TEST(OuterUpdate, EuclideanSingleTaskIsSgd) {
  MetaState state{small_model(30), Hyper{}};
  state.hyper.beta_stiefel = 0.05;
  state.hyper.beta_euclid = 0.02;
  state.theta.head = manifold::StiefelPoint::relaxed(state.theta.head.value());
  Rng rng(1);
  Gradients g = Gradients::zeros_like(state.theta);
  g.head = random_matrix(4, 3, rng);
  g.weights[0] = random_matrix(6, 4, rng);
  const std::vector<Gradients> grads{g};
  const MetaState next = outer_update(state, grads, kEuclid);
  EXPECT_EQ(next.theta.head.value(), state.theta.head.value() - 0.05 * g.head);
  EXPECT_EQ(next.theta.backbone[0].weight, state.theta.backbone[0].weight - 0.02 * g.weights[0]);
  EXPECT_EQ(next.theta.backbone[0].bias, state.theta.backbone[0].bias);
}

TEST(OuterUpdate, WeightDecayShrinksBackbone) {
  MetaState state{small_model(31), Hyper{}};
  state.hyper.beta_euclid = 0.1;
  state.hyper.weight_decay_euclid = 0.5;
  const std::vector<Gradients> grads{Gradients::zeros_like(state.theta)};
  const MetaState next = outer_update(state, grads, kPolar);
  EXPECT_TRUE(matrices_near(next.theta.backbone[0].weight, 0.95 * state.theta.backbone[0].weight, 1e-15));
  EXPECT_LT(max_abs(next.theta.head.value() - state.theta.head.value()), 1e-14);
}

TEST(OuterUpdate, StiefelHeadStaysOrthonormal) {
  MetaState state{small_model(32), Hyper{}};
  state.hyper.beta_stiefel = 0.2;
  Rng rng(2);
  for (int step = 0; step < 500; ++step) {
    std::vector<Gradients> grads(3, Gradients::zeros_like(state.theta));
    for (auto& g : grads) g.head = random_matrix(4, 3, rng);
    state = outer_update(state, grads, kPolar);
    ASSERT_LT(manifold::orthonormality_residual(state.theta.head.value()), 1e-8) << "step " << step;
  }
  EXPECT_THROW(outer_update(state, {}, kPolar), PreconditionError);
}

struct TrainFixture : ::testing::Test {
  tasks::BankSplits banks = tasks::make_bank(20, 6, 0.3, {0.6, 0.2, 0.2}, 5);
  TaskSource source{&banks.train, 3, 1, 4};
  MetaState initial{small_model(40), Hyper{0.1, 1e-2, 1e-2, 3, 2, 0.0}};

  TrainOptions options(Engine engine, int iters) const {
    TrainOptions o;
    o.outer_iters = iters;
    o.engine = engine;
    o.seed = 17;
    return o;
  }
};

void expect_same_history(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].iteration, b[i].iteration);
    EXPECT_EQ(a[i].meta_loss, b[i].meta_loss);
    EXPECT_EQ(a[i].query_accuracy, b[i].query_accuracy);
    EXPECT_EQ(a[i].head_orthonormality_residual, b[i].head_orthonormality_residual);
  }
}

TEST_F(TrainFixture, HistoryLengthAndInvariants) {
  const TrainResult r = meta_train(initial, source, options(Engine::Forml, 12));
  ASSERT_EQ(r.history.size(), 12u);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const auto& rec = r.history[i];
    EXPECT_EQ(rec.iteration, static_cast<int>(i) + 1);
    EXPECT_GE(rec.query_accuracy, 0.0);
    EXPECT_LE(rec.query_accuracy, 1.0);
    EXPECT_GE(rec.inner_time_s, 0.0);
    EXPECT_GE(rec.outer_time_s, 0.0);
    EXPECT_LT(rec.head_orthonormality_residual, 1e-8);
  }
}

TEST_F(TrainFixture, IdenticalSeedsGiveIdenticalHistories) {
  for (Engine e : {Engine::Forml, Engine::Fomaml, Engine::ExactEuclid}) {
    const TrainResult a = meta_train(initial, source, options(e, 6));
    const TrainResult b = meta_train(initial, source, options(e, 6));
    expect_same_history(a.history, b.history);
    EXPECT_EQ(a.state.theta.head.value(), b.state.theta.head.value());
  }
}

TEST_F(TrainFixture, ZeroStepFormlTrainsLikeFomaml) {
  initial.hyper.alpha = 0.0;
  const TrainResult a = meta_train(initial, source, options(Engine::Forml, 6));
  const TrainResult b = meta_train(initial, source, options(Engine::Fomaml, 6));
  expect_same_history(a.history, b.history);
  EXPECT_EQ(a.state.theta.head.value(), b.state.theta.head.value());
}

TEST_F(TrainFixture, FiniteDifferenceEngineRuns) {
  const TrainResult r = meta_train(initial, source, options(Engine::FdRmaml, 2));
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_LT(r.history.back().head_orthonormality_residual, 1e-8);
}

TEST_F(TrainFixture, CallbackSeesEveryIteration) {
  int calls = 0;
  meta_train(initial, source, options(Engine::Forml, 4), [&](const MetricsRecord&) { ++calls; });
  EXPECT_EQ(calls, 4);
}

TEST_F(TrainFixture, NonFiniteLossAbortsWithIteration) {
  std::vector<tasks::ClassEntry> broken;
  for (int c = 0; c < 4; ++c) {
    broken.push_back({c, std::vector<double>(6, std::numeric_limits<double>::quiet_NaN()), 0.1, Matrix()});
  }
  const tasks::TaskBank bad(tasks::Split::MetaTrain, 6, broken);
  const TaskSource bad_source{&bad, 3, 1, 4};
  try {
    meta_train(initial, bad_source, options(Engine::Forml, 5));
    FAIL() << "expected TrainingAborted";
  } catch (const TrainingAborted& e) {
    EXPECT_EQ(e.iteration(), 1);
    EXPECT_TRUE(e.history().empty());
  }
  EXPECT_THROW(meta_train(initial, source, options(Engine::Forml, 0)), PreconditionError);
}

TEST(Evaluate, ConfidenceIntervalFixtures) {
  std::vector<double> alternating;
  for (int i = 0; i < 100; ++i) alternating.push_back(i % 2);
  EXPECT_NEAR(confidence_interval95(alternating), kAlternatingCi95[0], 1e-15);
  EXPECT_NEAR(confidence_interval95(alternating), 1.96 * 0.50251890762960605 / 10.0, 1e-15);
  const std::vector<double> constant(10, 0.8);
  EXPECT_EQ(confidence_interval95(constant), 0.0);
  const std::vector<double> one{0.5};
  EXPECT_THROW(confidence_interval95(one), PreconditionError);
}

TEST(Evaluate, MeanAndIntervalOverEpisodes) {
  const auto banks = tasks::make_bank(20, 6, 0.3, {0.6, 0.2, 0.2}, 6);
  const TaskSource source{&banks.test, 3, 1, 5};
  const MetaState state{small_model(50), Hyper{}};
  Rng rng(3);
  const EvalResult r = meta_evaluate(state, source, 40, 0.1, 2, kPolar, rng);
  ASSERT_EQ(r.accuracies.size(), 40u);
  double sum = 0.0;
  for (double a : r.accuracies) sum += a;
  EXPECT_DOUBLE_EQ(r.mean_accuracy, sum / 40.0);
  EXPECT_DOUBLE_EQ(r.ci95, confidence_interval95(r.accuracies));
  Rng again(3);
  EXPECT_THROW(meta_evaluate(state, source, 1, 0.1, 2, kPolar, again), PreconditionError);
}

TEST(Evaluate, SeparableTasksScorePerfectly) {
  const auto banks = tasks::make_bank(20, 6, 0.0, {0.6, 0.2, 0.2}, 7);
  const TaskSource source{&banks.test, 3, 1, 5};
  const MetaState state{small_model(51), Hyper{}};
  Rng rng(4);
  const EvalResult r = meta_evaluate(state, source, 20, 0.1, 20, kPolar, rng);
  EXPECT_EQ(r.mean_accuracy, 1.0);
  EXPECT_EQ(r.ci95, 0.0);
}

}  // namespace
}  // namespace forml::meta
