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

#include "forml/harness/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <ostream>

#include "forml/errors.hpp"
#include "forml/harness/metrics.hpp"
#include "forml/linalg.hpp"

namespace forml::harness {

namespace {

constexpr double kPrimitiveTolerance = 1e-5;
constexpr double kExactTolerance = 1e-4;
constexpr double kLinearTolerance = 1e-5;
constexpr double kFactorTolerance = 1e-12;
constexpr double kReductionTolerance = 1e-14;
constexpr double kAngleLimitDeg = 15.0;
constexpr double kAnglePassRate = 0.9;
constexpr double kAngleAlpha = 0.01;
constexpr int kFactorTrials = 200;

// Small model shared by the oracle checks.
constexpr std::size_t kCheckInput = 6;
constexpr std::size_t kCheckFeature = 4;
constexpr std::size_t kCheckClasses = 3;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

double norm_relative(const Matrix& analytic, const Matrix& reference) {
  const double den = frobenius_norm(reference);
  const double num = frobenius_norm(analytic - reference);
  return den > 0.0 ? num / den : num;
}

CheckResult verdict(std::string name, double err, double tol, std::string detail = {}) {
  return {std::move(name), err, tol, err <= tol, std::move(detail)};
}

void apply_corruption(ad::Tape& tape, const GradcheckOptions& opts) {
  if (opts.corrupt) tape.corrupt_vjp(opts.corrupt->first, opts.corrupt->second);
}

// Scalarises an op output with fixed random weights so every output entry
// carries a distinct cotangent.
ad::Var weighted_sum(ad::Tape& t, ad::Var out, std::uint64_t seed) {
  Rng rng(seed);
  return t.sum(t.hadamard(out, t.constant(random_matrix(out.rows, out.cols, rng))));
}

struct PrimitiveCase {
  ad::OpKind kind;
  std::size_t rows, cols;
  std::function<ad::Var(ad::Tape&, ad::Var, Rng&)> build;
  bool away_from_zero = false;
};

double primitive_error(const PrimitiveCase& c, const GradcheckOptions& opts, std::uint64_t seed) {
  Rng point_rng = Rng::substream({seed, 0});
  Matrix x = random_matrix(c.rows, c.cols, point_rng);
  if (c.away_from_zero) {
    for (double& v : x.data()) v = std::copysign(0.1 + std::abs(v), v);
  }
  const ad::LeafLoss f = [&](ad::Tape& t, ad::Var leaf) {
    apply_corruption(t, opts);
    Rng const_rng = Rng::substream({seed, 1});
    return weighted_sum(t, c.build(t, leaf, const_rng), seed + 7);
  };
  ad::Tape tape;
  const ad::Var leaf = tape.leaf(x);
  const Matrix analytic = tape.backward(f(tape, leaf)).at(leaf);
  const Matrix fd = ad::finite_difference_gradient(f, x, opts.fd_step);
  return norm_relative(analytic, fd);
}

std::vector<PrimitiveCase> primitive_cases() {
  using ad::OpKind;
  using ad::Tape;
  using ad::Var;
  auto c = [](Tape& t, std::size_t r, std::size_t k, Rng& rng) { return t.constant(random_matrix(r, k, rng)); };
  return {
      {OpKind::MatMul, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.matmul(x, c(t, 4, 2, r)); }},
      {OpKind::MatMul, 4, 2, [c](Tape& t, Var x, Rng& r) { return t.matmul(c(t, 3, 4, r), x); }},
      {OpKind::Transpose, 3, 4, [](Tape& t, Var x, Rng&) { return t.transpose(x); }},
      {OpKind::Add, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.add(x, c(t, 3, 4, r)); }},
      {OpKind::Add, 1, 4, [c](Tape& t, Var x, Rng& r) { return t.add_row_broadcast(c(t, 3, 4, r), x); }},
      {OpKind::Sub, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.sub(c(t, 3, 4, r), x); }},
      {OpKind::Scale, 3, 4, [](Tape& t, Var x, Rng&) { return t.scale(x, -1.7); }},
      {OpKind::Hadamard, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.hadamard(x, c(t, 3, 4, r)); }},
      {OpKind::Tanh, 3, 4, [](Tape& t, Var x, Rng&) { return t.tanh(x); }},
      {OpKind::Relu, 3, 4, [](Tape& t, Var x, Rng&) { return t.relu(x); }, true},
      {OpKind::RowInvNorm, 3, 4, [](Tape& t, Var x, Rng&) { return t.row_inv_norm(x); }},
      {OpKind::RowNormalize, 3, 4, [](Tape& t, Var x, Rng&) { return t.row_l2_normalize(x); }},
      {OpKind::RowScale, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.row_scale(x, c(t, 3, 1, r)); }},
      {OpKind::RowScale, 3, 1, [c](Tape& t, Var x, Rng& r) { return t.row_scale(c(t, 3, 4, r), x); }},
      {OpKind::RowDot, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.row_dot(x, c(t, 3, 4, r)); }},
      {OpKind::RowDot, 3, 4, [](Tape& t, Var x, Rng&) { return t.row_dot(x, x); }},
      {OpKind::Softmax, 3, 4, [](Tape& t, Var x, Rng&) { return t.softmax(x); }},
      {OpKind::SoftmaxCrossEntropy, 5, 3,
       [](Tape& t, Var x, Rng&) {
         static const std::vector<int> labels{0, 2, 1, 1, 0};
         return t.softmax_cross_entropy(x, labels);
       }},
      {OpKind::Mean, 3, 4, [](Tape& t, Var x, Rng&) { return t.mean(x); }},
      {OpKind::Sum, 3, 4, [](Tape& t, Var x, Rng&) { return t.sum(x); }},
      {OpKind::ScalarMul, 3, 4, [c](Tape& t, Var x, Rng& r) { return t.scalar_mul(x, c(t, 1, 1, r)); }},
      {OpKind::ScalarMul, 1, 1, [c](Tape& t, Var x, Rng& r) { return t.scalar_mul(c(t, 3, 4, r), x); }},
  };
}

model::ModelParams check_model(std::uint64_t seed) {
  const std::array<std::size_t, 2> dims{kCheckInput, kCheckFeature};
  return model::init_params(dims, kCheckClasses, model::Activation::Tanh, 10.0, seed);
}

tasks::Episode check_episode(std::uint64_t seed) {
  const auto banks = tasks::make_bank(10, kCheckInput, 0.3, {0.6, 0.2, 0.2}, seed);
  Rng rng = Rng::substream({seed, 11});
  return tasks::sample_episode(banks.train, kCheckClasses, 2, 3, rng);
}

}  // namespace

std::string format_check(const CheckResult& r) {
  std::string line = std::string(r.pass ? "[PASS] " : "[FAIL] ") + r.name + "  max_err=" + sci(r.max_error) +
                     " tol=" + sci(r.tolerance);
  if (!r.detail.empty()) line += "  " + r.detail;
  return line;
}

double angle_degrees(const Matrix& a, const Matrix& b) {
  const double na = frobenius_norm(a), nb = frobenius_norm(b);
  if (na == 0.0 || nb == 0.0) return 90.0;
  const double c = std::clamp(inner(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::vector<CheckResult> check_primitive_vjps(const GradcheckOptions& opts) {
  std::vector<CheckResult> out;
  const auto cases = primitive_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string name = "vjp:" + std::string(ad::op_name(cases[i].kind));
    const double err = primitive_error(cases[i], opts, opts.seed * 1000 + i);
    auto existing = std::find_if(out.begin(), out.end(), [&](const CheckResult& r) { return r.name == name; });
    if (existing == out.end()) {
      out.push_back(verdict(name, err, kPrimitiveTolerance));
    } else {
      *existing = verdict(name, std::max(existing->max_error, err), kPrimitiveTolerance);
    }
  }
  return out;
}

CheckResult check_episode_loss_gradient(const GradcheckOptions& opts) {
  const model::ModelParams params = check_model(opts.seed);
  const tasks::Episode episode = check_episode(opts.seed);
  std::vector<Matrix> blocks;
  for (const auto& l : params.backbone) {
    blocks.push_back(l.weight);
    blocks.push_back(l.bias);
  }
  blocks.push_back(params.head.value());

  double worst = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ad::LeafLoss f = [&](ad::Tape& t, ad::Var leaf) {
      apply_corruption(t, opts);
      std::vector<ad::Var> vars;
      for (std::size_t j = 0; j < blocks.size(); ++j) vars.push_back(j == b ? leaf : t.constant(blocks[j]));
      model::ParamVars pv;
      for (std::size_t j = 0; j + 1 < vars.size(); j += 2) pv.layers.emplace_back(vars[j], vars[j + 1]);
      pv.head = vars.back();
      return model::episode_loss(t, params, pv, episode.query).loss;
    };
    ad::Tape tape;
    const ad::Var leaf = tape.leaf(blocks[b]);
    const Matrix analytic = tape.backward(f(tape, leaf)).at(leaf);
    worst = std::max(worst, norm_relative(analytic, ad::finite_difference_gradient(f, blocks[b], opts.fd_step)));
  }
  return verdict("episode-loss gradient", worst, kPrimitiveTolerance);
}

CheckResult check_exact_vs_fd(const GradcheckOptions& opts) {
  double worst = 0.0;
  int passed = 0;
  for (int trial = 0; trial < opts.trials; ++trial) {
    const std::uint64_t seed = opts.seed * 7919 + static_cast<std::uint64_t>(trial);
    const int k = 1 + trial % 3;
    const model::ModelParams theta = check_model(seed);
    const tasks::Episode episode = check_episode(seed);
    const auto losses = meta::classification_losses(theta, episode);
    const auto exact = meta::exact_unrolled_euclid(theta, losses, opts.alpha, k);
    const auto fd = meta::fd_meta_gradient(theta, losses, opts.alpha, k, manifold::ManifoldKind::euclid(),
                                           opts.fd_step);
    const double err = meta::relative_error(exact.grads, fd);
    worst = std::max(worst, err);
    if (err <= kExactTolerance) ++passed;
  }
  return verdict("exact-unrolled vs finite-difference meta-gradient", worst, kExactTolerance,
                 std::to_string(passed) + "/" + std::to_string(opts.trials) + " trials");
}

CheckResult check_linear_loss_exactness(const GradcheckOptions& opts) {
  const auto additive = manifold::ManifoldKind::stiefel(manifold::RetractionMode::Additive);
  double worst = 0.0;
  int passed = 0;
  for (int trial = 0; trial < opts.trials; ++trial) {
    const std::uint64_t seed = opts.seed * 104729 + static_cast<std::uint64_t>(trial);
    Rng rng(seed);
    const std::size_t n = 3 + static_cast<std::size_t>(trial % 4);
    const std::size_t p = 2 + static_cast<std::size_t>(trial % 2);
    const std::array<std::size_t, 1> dims{n};
    const model::ModelParams theta = model::init_params(dims, p, model::Activation::Identity, 1.0, seed);
    const Matrix cs = random_matrix(n, p, rng);
    const Matrix cq = random_matrix(n, p, rng);
    const auto losses = meta::linear_head_losses(cs, cq);
    const auto traj = meta::inner_adapt(theta, losses.support, opts.alpha, 1, additive);
    const auto forml = meta::forml_meta_gradient(traj, losses.query, opts.alpha, additive);
    const auto fd = meta::fd_meta_gradient(theta, losses, opts.alpha, 1, additive, opts.fd_step);
    const double err = norm_relative(forml.grads.head, fd.head);
    worst = std::max(worst, err);
    if (err <= kLinearTolerance) ++passed;
  }
  return verdict("linear-loss FORML exactness", worst, kLinearTolerance,
                 std::to_string(passed) + "/" + std::to_string(opts.trials) + " trials");
}

CheckResult check_factor_equivalence(const GradcheckOptions& opts) {
  static constexpr std::array<double, 3> kAlphas{0.01, 0.1, 1.0};
  Rng rng = Rng::substream({opts.seed, 0xFAC7});
  double worst = 0.0;
  for (int trial = 0; trial < kFactorTrials; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 6;
    const std::size_t p = 1 + rng.next_u64() % std::min<std::size_t>(n, 4);
    const double alpha = kAlphas[static_cast<std::size_t>(trial) % kAlphas.size()];
    const Matrix phi = random_matrix(n, p, rng);
    const Matrix gs = random_matrix(n, p, rng);
    const Matrix gq = random_matrix(n, p, rng);
    const Matrix h = meta::first_order_factor(phi, gs, alpha);
    const Matrix explicit_path = unvec(matmul(h.transpose(), vec(gq)), n, p);
    const Matrix fast = meta::apply_factor_fast(gq, phi, gs, alpha);
    worst = std::max(worst, max_abs(fast - explicit_path));
  }
  return verdict("factor equivalence (fast vs explicit)", worst, kFactorTolerance,
                 std::to_string(kFactorTrials) + " trials");
}

CheckResult check_euclidean_reduction(const GradcheckOptions& opts) {
  const auto euclid = manifold::ManifoldKind::euclid();
  double worst = 0.0;
  for (int k : {1, 3, 5}) {
    const std::uint64_t seed = opts.seed * 31 + static_cast<std::uint64_t>(k);
    const model::ModelParams theta = check_model(seed);
    const tasks::Episode episode = check_episode(seed);
    const auto losses = meta::classification_losses(theta, episode);
    const auto traj = meta::inner_adapt(theta, losses.support, opts.alpha, k, euclid);
    const auto forml = meta::forml_meta_gradient(traj, losses.query, opts.alpha, euclid);
    const auto fomaml = meta::fomaml_meta_gradient(traj, losses.query);
    worst = std::max(worst, meta::max_abs_difference(forml.grads, fomaml.grads));
  }
  return verdict("euclidean reduction (FORML == FOMAML)", worst, kReductionTolerance, "k in {1,3,5}");
}

CheckResult check_approximation_direction(const GradcheckOptions& opts) {
  const auto polar = manifold::ManifoldKind::stiefel(manifold::RetractionMode::Polar);
  double worst = 0.0;
  int passed = 0;
  for (int trial = 0; trial < opts.trials; ++trial) {
    const std::uint64_t seed = opts.seed * 6151 + static_cast<std::uint64_t>(trial);
    const model::ModelParams theta = check_model(seed);
    const tasks::Episode episode = check_episode(seed);
    const auto losses = meta::classification_losses(theta, episode);
    const auto traj = meta::inner_adapt(theta, losses.support, kAngleAlpha, 1, polar);
    const auto forml = meta::forml_meta_gradient(traj, losses.query, kAngleAlpha, polar);
    const auto fd = meta::fd_meta_gradient(theta, losses, kAngleAlpha, 1, polar, opts.fd_step);
    // The outer step only consumes the tangent component; the normal part of
    // the raw Euclidean gradient never reaches the parameters.
    const Matrix& base = theta.head.value();
    const double angle = angle_degrees(manifold::project_matrix(base, forml.grads.head),
                                       manifold::project_matrix(base, fd.head));
    worst = std::max(worst, angle);
    if (angle < kAngleLimitDeg) ++passed;
  }
  const double rate = static_cast<double>(passed) / opts.trials;
  CheckResult r{"approximation direction (angle, degrees)", worst, kAngleLimitDeg, rate >= kAnglePassRate,
                std::to_string(passed) + "/" + std::to_string(opts.trials) + " under limit, need 90%"};
  return r;
}

std::vector<CheckResult> run_gradcheck(const GradcheckOptions& opts) {
  std::vector<CheckResult> out = check_primitive_vjps(opts);
  out.push_back(check_episode_loss_gradient(opts));
  out.push_back(check_exact_vs_fd(opts));
  out.push_back(check_linear_loss_exactness(opts));
  out.push_back(check_factor_equivalence(opts));
  out.push_back(check_euclidean_reduction(opts));
  return out;
}

Experiment build_experiment(const RunConfig& config) {
  config.validate();
  const std::uint64_t bank_seed = Rng::substream({config.seed, 0xBA4C}).next_u64();
  const std::uint64_t init_seed = Rng::substream({config.seed, 0x1417}).next_u64();
  std::optional<tasks::BankSplits> banks;
  if (config.dataset.empty()) {
    banks.emplace(tasks::make_bank(static_cast<std::size_t>(config.classes),
                                   static_cast<std::size_t>(config.input_dim), config.sigma, config.split,
                                   bank_seed));
  } else {
    const auto data = tasks::load_dataset_file(config.dataset);
    if (data.dim != static_cast<std::size_t>(config.input_dim)) {
      throw ConfigError("config key 'input_dim': " + std::to_string(config.input_dim) +
                        " does not match dataset dimension " + std::to_string(data.dim));
    }
    banks.emplace(data.split(config.split, bank_seed));
  }
  const auto dims = config.layer_dims();
  meta::MetaState state{model::init_params(dims, static_cast<std::size_t>(config.ways), config.activation,
                                           config.logit_scale, init_seed),
                        config.hyper()};
  return {std::move(*banks), std::move(state)};
}

meta::TaskSource task_source(const RunConfig& config, const tasks::TaskBank& bank) {
  return {&bank, static_cast<std::size_t>(config.ways), static_cast<std::size_t>(config.shots),
          static_cast<std::size_t>(config.queries)};
}

std::vector<BenchmarkRow> run_benchmark(const RunConfig& config, int warmup, int iters) {
  if (iters < 1 || warmup < 0) throw PreconditionError("run_benchmark: need iters >= 1 and warmup >= 0");
  const Experiment exp = build_experiment(config);
  const meta::TaskSource source = task_source(config, exp.banks.train);
  std::vector<BenchmarkRow> rows;
  for (meta::Engine engine : {meta::Engine::Forml, meta::Engine::Fomaml, meta::Engine::ExactEuclid}) {
    meta::TrainOptions opts;
    opts.outer_iters = warmup + iters;
    opts.engine = engine;
    opts.manifold = config.manifold_kind();
    opts.seed = config.seed;
    opts.fd_step = config.fd_step;
    const auto result = meta::meta_train(exp.initial, source, opts);
    BenchmarkRow row;
    row.engine = engine;
    for (std::size_t i = static_cast<std::size_t>(warmup); i < result.history.size(); ++i) {
      row.inner_time_s += result.history[i].inner_time_s;
      row.outer_time_s += result.history[i].outer_time_s;
    }
    row.inner_time_s /= iters;
    row.outer_time_s /= iters;
    rows.push_back(row);
  }
  for (auto& row : rows) {
    row.inner_ratio = row.inner_time_s / rows.front().inner_time_s;
    row.outer_ratio = row.outer_time_s / rows.front().outer_time_s;
  }
  return rows;
}

void write_benchmark_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "engine,inner_time_s,outer_time_s,inner_ratio_vs_forml,outer_ratio_vs_forml\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.9g,%.9g\n", std::string(meta::to_string(r.engine)).c_str(),
                  r.inner_time_s, r.outer_time_s, r.inner_ratio, r.outer_ratio);
    out << buf;
  }
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

std::filesystem::path prepare_output(const RunConfig& config) {
  const std::filesystem::path dir(config.output);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_summary(const std::filesystem::path& path, const meta::EvalResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "mean_acc,ci95,episodes\n%.17g,%.17g,%zu\n", r.mean_accuracy, r.ci95,
                r.accuracies.size());
  write_text(path, buf);
}

std::string describe(const meta::EvalResult& r) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.4f +- %.4f (95%% CI, %zu episodes)", r.mean_accuracy, r.ci95,
                r.accuracies.size());
  return buf;
}

}  // namespace

int cmd_train(const RunConfig& config, std::ostream& out) {
  const auto dir = prepare_output(config);
  const std::string echo = echo_config(config);
  out << "# resolved config\n" << echo;
  write_text(dir / "config.resolved", echo);

  const Experiment exp = build_experiment(config);
  const meta::TaskSource train_source = task_source(config, exp.banks.train);
  meta::TrainOptions opts;
  opts.outer_iters = config.outer_iters;
  opts.engine = config.engine;
  opts.manifold = config.manifold_kind();
  opts.seed = config.seed;
  opts.fd_step = config.fd_step;

  const int report_every = std::max(1, config.outer_iters / 10);
  const auto progress = [&](const meta::MetricsRecord& r) {
    if (r.iteration % report_every == 0 || r.iteration == config.outer_iters) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "iter %d  meta_loss %.5f  query_acc %.4f  orth %.2e\n", r.iteration,
                    r.meta_loss, r.query_accuracy, r.head_orthonormality_residual);
      out << buf << std::flush;
    }
  };

  const auto metrics_path = dir / "metrics.csv";
  std::optional<meta::TrainResult> trained;
  try {
    trained.emplace(meta::meta_train(exp.initial, train_source, opts, progress));
  } catch (const meta::TrainingAborted& e) {
    write_metrics(metrics_path, e.history());
    append_abort(metrics_path, e.iteration(), e.what());
    out << "aborted: " << e.what() << "\n";
    return 2;
  }
  const meta::TrainResult& result = *trained;
  write_metrics(metrics_path, result.history);

  const meta::TaskSource test_source = task_source(config, exp.banks.test);
  Rng eval_rng = Rng::substream({config.seed, 0xE7A1});
  const auto eval = meta::meta_evaluate(result.state, test_source, config.eval_episodes, config.alpha,
                                        config.inner_steps, meta::engine_manifold(config.engine, opts.manifold),
                                        eval_rng);
  append_summary(metrics_path, eval);
  write_summary(dir / "summary.csv", eval);
  out << "meta-test accuracy " << describe(eval) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& config, int episodes, std::ostream& out) {
  if (episodes < 2) throw ConfigError("eval: --episodes must be >= 2");
  const auto dir = prepare_output(config);
  const Experiment exp = build_experiment(config);
  const meta::TaskSource test_source = task_source(config, exp.banks.test);
  Rng eval_rng = Rng::substream({config.seed, 0xE7A1});
  const auto eval = meta::meta_evaluate(exp.initial, test_source, episodes, config.alpha, config.inner_steps,
                                        meta::engine_manifold(config.engine, config.manifold_kind()), eval_rng);
  write_summary(dir / "eval_summary.csv", eval);
  out << "meta-test accuracy at initialisation " << describe(eval) << "\n";
  return 0;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& out) {
  GradcheckOptions opts;
  opts.fd_step = config.fd_step;
  opts.alpha = config.alpha;
  opts.seed = config.seed;
  out << "finite-difference step h = " << sci(opts.fd_step) << "\n";
  bool all = true;
  for (const auto& r : run_gradcheck(opts)) {
    out << format_check(r) << "\n";
    all = all && r.pass;
  }
  out << (all ? "gradcheck: all checks passed\n" : "gradcheck: FAILED\n");
  return all ? 0 : 1;
}

int cmd_benchmark(const RunConfig& config, std::ostream& out) {
  const auto dir = prepare_output(config);
  const auto rows = run_benchmark(config, config.bench_warmup, config.bench_iters);
  write_benchmark_csv(dir / "benchmark.csv", rows);
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-13s %14s %14s %10s %10s\n", "engine", "inner_s/iter", "outer_s/iter",
                "inner_x", "outer_x");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-13s %14.6g %14.6g %10.3f %10.3f\n",
                  std::string(meta::to_string(r.engine)).c_str(), r.inner_time_s, r.outer_time_s, r.inner_ratio,
                  r.outer_ratio);
    out << buf;
  }
  out << "wrote " << (dir / "benchmark.csv").string() << "\n";
  return 0;
}

}  // namespace forml::harness
