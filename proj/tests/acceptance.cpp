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

// Acceptance suite: one PASS/FAIL line per criterion. Run all criteria, or
// one with --criterion N. Exit status is 0 iff every selected criterion passes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "forml/harness/commands.hpp"
#include "forml/harness/config.hpp"
#include "forml/linalg.hpp"
#include "forml/meta.hpp"
#include "forml/stiefel.hpp"

namespace {

using namespace forml;
using Clock = std::chrono::steady_clock;

// Thresholds, pinned.
constexpr int kManifoldTrials = 1000;
constexpr std::size_t kManifoldMaxN = 8;
constexpr double kTangencyTol = 1e-9;
constexpr double kIdempotenceTol = 1e-12;
constexpr double kOrthonormalityTol = 1e-9;
constexpr double kTransportTol = 1e-9;
constexpr double kManifoldSeconds = 10.0;
constexpr int kKronTrials = 200;
constexpr double kKronTol = 1e-12;
constexpr double kFactorSeconds = 5.0;
constexpr int kOracleSeeds = 20;
constexpr double kDeskAccuracy = 0.85;
constexpr double kDeskResidual = 1e-8;
constexpr double kDeskSeconds = 300.0;
constexpr double kOuterRatio = 0.5;
constexpr int kBenchWarmup = 5;
constexpr int kBenchIters = 50;

struct Outcome {
  bool pass;
  std::string detail;
};

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

std::string check_line(const harness::CheckResult& r) {
  return fmt("%s max_err=%.3e tol=%.1e %s", r.name.c_str(), r.max_error, r.tolerance, r.detail.c_str());
}

Outcome manifold_invariants() {
  const auto start = Clock::now();
  Rng rng(20260101);
  double tangency = 0, idempotence = 0, orthonormality = 0, transport = 0;
  for (int t = 0; t < kManifoldTrials; ++t) {
    const std::size_t n = 1 + rng.next_u64() % kManifoldMaxN;
    const std::size_t p = 1 + rng.next_u64() % n;
    const auto x = manifold::random_point(n, p, rng);
    const auto v = manifold::project(x, gaussian(n, p, rng));
    tangency = std::max(tangency, manifold::tangency_residual(x.value(), v.value()));
    idempotence = std::max(idempotence, max_abs(manifold::project_matrix(x.value(), v.value()) - v.value()));
    const auto y = manifold::retract(x, v, manifold::RetractionMode::Polar);
    orthonormality = std::max(orthonormality, manifold::orthonormality_residual(y.value()));
    const auto w = manifold::transport(x, y, v);
    transport = std::max(transport, manifold::tangency_residual(y.value(), w.value()));
  }
  const double secs = elapsed(start);
  const bool pass = tangency < kTangencyTol && idempotence < kIdempotenceTol &&
                    orthonormality < kOrthonormalityTol && transport < kTransportTol && secs < kManifoldSeconds;
  return {pass, fmt("%d trials: tangency %.2e (<%.0e), idempotence %.2e (<%.0e), polar orthonormality %.2e "
                    "(<%.0e), transport tangency %.2e (<%.0e), %.2fs (<%.0fs)",
                    kManifoldTrials, tangency, kTangencyTol, idempotence, kIdempotenceTol, orthonormality,
                    kOrthonormalityTol, transport, kTransportTol, secs, kManifoldSeconds)};
}

Outcome kronecker_identities() {
  Rng rng(20260102);
  double worst = 0;
  bool sums_exact = true;
  for (int t = 0; t < kKronTrials; ++t) {
    const std::size_t m = 1 + rng.next_u64() % 4, n = 1 + rng.next_u64() % 4;
    const std::size_t p = 1 + rng.next_u64() % 4, q = 1 + rng.next_u64() % 4;
    const Matrix a = gaussian(m, n, rng), x = gaussian(n, p, rng), b = gaussian(p, q, rng);
    worst = std::max(worst, max_abs(vec(a * x * b) - kron(b.transpose(), a) * vec(x)));
    const Matrix sa = gaussian(p, p, rng), sb = gaussian(n, n, rng);
    sums_exact = sums_exact &&
                 kron_sum(sa, sb) == kron(sa, Matrix::identity(n)) + kron(Matrix::identity(p), sb);
  }
  return {worst <= kKronTol && sums_exact,
          fmt("%d trials: vec(AXB) vs kron(B^T,A)vec(X) max %.2e (<=%.0e); kron_sum expansion %s", kKronTrials,
              worst, kKronTol, sums_exact ? "exact" : "NOT exact")};
}

Outcome factor_equivalence() {
  const auto start = Clock::now();
  const auto r = harness::check_factor_equivalence({});
  const double secs = elapsed(start);
  return {r.pass && secs < kFactorSeconds, check_line(r) + fmt(", %.3fs (<%.0fs)", secs, kFactorSeconds)};
}

Outcome linear_loss_exactness() {
  harness::GradcheckOptions opts;
  opts.trials = kOracleSeeds;
  const auto r = harness::check_linear_loss_exactness(opts);
  return {r.pass && r.detail.rfind(std::to_string(kOracleSeeds) + "/", 0) == 0, check_line(r)};
}

Outcome euclidean_reduction() {
  const auto r = harness::check_euclidean_reduction({});
  return {r.pass, check_line(r)};
}

Outcome exact_maml_cross_check() {
  harness::GradcheckOptions opts;
  opts.trials = kOracleSeeds;
  const auto exact = harness::check_exact_vs_fd(opts);
  bool pass = exact.pass;
  std::string failed;
  double worst_vjp = 0;
  for (const auto& r : harness::check_primitive_vjps(opts)) {
    worst_vjp = std::max(worst_vjp, r.max_error);
    if (!r.pass) {
      pass = false;
      failed += " " + r.name;
    }
  }
  return {pass, check_line(exact) + fmt("; primitive VJPs max %.2e (<=1e-05)", worst_vjp) +
                    (failed.empty() ? "" : "; failing:" + failed)};
}

Outcome desk_scale_learning() {
  const auto start = Clock::now();
  const harness::RunConfig config;  // defaults carry the protocol
  const auto exp = harness::build_experiment(config);
  meta::TrainOptions opts;
  opts.outer_iters = config.outer_iters;
  opts.engine = meta::Engine::Forml;
  opts.manifold = config.manifold_kind();
  opts.seed = config.seed;
  const auto trained = meta::meta_train(exp.initial, harness::task_source(config, exp.banks.train), opts);
  double worst_residual = 0;
  for (const auto& r : trained.history) worst_residual = std::max(worst_residual, r.head_orthonormality_residual);
  Rng eval_rng = Rng::substream({config.seed, 0xE7A1});
  const auto eval = meta::meta_evaluate(trained.state, harness::task_source(config, exp.banks.test),
                                        config.eval_episodes, config.alpha, config.inner_steps,
                                        config.manifold_kind(), eval_rng);
  const double secs = elapsed(start);
  const bool pass = eval.mean_accuracy >= kDeskAccuracy && worst_residual < kDeskResidual && secs < kDeskSeconds;
  return {pass, fmt("%d-way %d-shot, %d iters: meta-test accuracy %.4f +- %.4f (95%% CI, %d episodes; need >= "
                    "%.2f), max head residual %.2e (<%.0e), %.1fs (<%.0fs)",
                    config.ways, config.shots, config.outer_iters, eval.mean_accuracy, eval.ci95,
                    config.eval_episodes, kDeskAccuracy, worst_residual, kDeskResidual, secs, kDeskSeconds)};
}

Outcome outer_loop_speedup() {
  harness::RunConfig config;  // head 64x5, backbone 16 -> 64, k = 5, B = 4
  const auto rows = harness::run_benchmark(config, kBenchWarmup, kBenchIters);
  const std::filesystem::path csv = "acceptance_benchmark.csv";
  harness::write_benchmark_csv(csv, rows);
  double forml = 0, exact = 0;
  for (const auto& r : rows) {
    if (r.engine == meta::Engine::Forml) forml = r.outer_time_s;
    if (r.engine == meta::Engine::ExactEuclid) exact = r.outer_time_s;
  }
  const double ratio = forml / exact;
  return {ratio <= kOuterRatio, fmt("outer time FORML %.3es, EXACT_EUCLID %.3es, ratio %.3f (<=%.1f) over %d "
                                    "iterations; csv %s",
                                    forml, exact, ratio, kOuterRatio, kBenchIters, csv.string().c_str())};
}

Outcome approximation_direction() {
  harness::GradcheckOptions opts;
  opts.trials = kOracleSeeds;
  const auto r = harness::check_approximation_direction(opts);
  return {r.pass, check_line(r)};
}

Outcome determinism_and_protocol() {
  const auto banks = tasks::make_bank(20, 6, 0.3, {0.6, 0.2, 0.2}, 9);
  const meta::TaskSource source{&banks.train, 3, 1, 4};
  const std::vector<std::size_t> dims{6, 8};
  const meta::MetaState initial{model::init_params(dims, 3, model::Activation::Tanh, 10.0, 3), meta::Hyper{}};
  meta::TrainOptions opts;
  opts.outer_iters = 20;
  opts.seed = 5;
  bool identical = true;
  for (meta::Engine e : {meta::Engine::Forml, meta::Engine::Fomaml, meta::Engine::ExactEuclid}) {
    opts.engine = e;
    const auto a = meta::meta_train(initial, source, opts);
    const auto b = meta::meta_train(initial, source, opts);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      identical = identical && a.history[i].meta_loss == b.history[i].meta_loss &&
                  a.history[i].query_accuracy == b.history[i].query_accuracy &&
                  a.history[i].head_orthonormality_residual == b.history[i].head_orthonormality_residual;
    }
    identical = identical && a.state.theta.head.value() == b.state.theta.head.value();
  }
  // {0,1} alternating over 100 episodes: s = sqrt(25/99).
  std::vector<double> alternating;
  for (int i = 0; i < 100; ++i) alternating.push_back(i % 2);
  const double ci = meta::confidence_interval95(alternating);
  const double expected = 1.96 * 0.50251890762960605 / 10.0;
  const bool ci_ok = std::abs(ci - expected) <= 1e-15;
  return {identical && ci_ok, fmt("repeat runs %s; ci95 fixture %.12f vs hand-computed %.12f", 
                                  identical ? "bit-identical" : "DIFFER", ci, expected)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FORML acceptance suite"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "manifold invariants", manifold_invariants},
      {2, "kronecker/vec identities", kronecker_identities},
      {3, "factor equivalence", factor_equivalence},
      {4, "linear-loss exactness", linear_loss_exactness},
      {5, "euclidean reduction", euclidean_reduction},
      {6, "exact-MAML cross-check", exact_maml_cross_check},
      {7, "desk-scale learning", desk_scale_learning},
      {8, "outer-loop speedup", outer_loop_speedup},
      {9, "approximation direction", approximation_direction},
      {10, "determinism and protocol", determinism_and_protocol},
  };
  bool all = true;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o{false, ""};
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] #%d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
