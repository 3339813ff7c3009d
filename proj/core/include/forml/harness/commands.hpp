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

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "forml/autodiff.hpp"
#include "forml/harness/config.hpp"
#include "forml/meta.hpp"
#include "forml/tasks.hpp"

namespace forml::harness {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

/// One report line: `[PASS] name  max_err=... tol=... detail`.
std::string format_check(const CheckResult& r);

struct GradcheckOptions {
  double fd_step = 1e-6;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  int trials = 20;
  /// Negative control: scale the vector-Jacobian rule of one primitive.
  std::optional<std::pair<ad::OpKind, double>> corrupt;
};

/// Vector-Jacobian rule of every differentiable primitive against central
/// differences, one result per primitive, tolerance 1e-5 relative.
std::vector<CheckResult> check_primitive_vjps(const GradcheckOptions& opts);
/// Full episode loss of a (6 -> 4, C = 3) model, every parameter block, 1e-5 relative.
CheckResult check_episode_loss_gradient(const GradcheckOptions& opts);
/// exact_unrolled_euclid against fd_meta_gradient, k cycling 1..3, 1e-4 relative.
CheckResult check_exact_vs_fd(const GradcheckOptions& opts);
/// Additive retraction, k = 1, head-linear loss: FORML head gradient against
/// the finite-difference meta-gradient, 1e-5 relative, every trial.
CheckResult check_linear_loss_exactness(const GradcheckOptions& opts);
/// apply_factor_fast against the explicit np x np factor, 200 trials, 1e-12.
CheckResult check_factor_equivalence(const GradcheckOptions& opts);
/// FORML with a Euclidean head against FOMAML for k in {1, 3, 5}, 1e-14 per entry.
CheckResult check_euclidean_reduction(const GradcheckOptions& opts);
/// Polar retraction, alpha = 0.01, k = 1: angle between the tangent components
/// (at the meta-parameters) of the FORML and finite-difference head
/// meta-gradients below 15 degrees in at least 90% of trials.
CheckResult check_approximation_direction(const GradcheckOptions& opts);

/// The gradcheck suite in report order.
std::vector<CheckResult> run_gradcheck(const GradcheckOptions& opts);

/// Angle in degrees between two equally shaped matrices seen as vectors.
double angle_degrees(const Matrix& a, const Matrix& b);

/// Banks and initial meta-state derived from a config.
struct Experiment {
  tasks::BankSplits banks;
  meta::MetaState initial;
};

Experiment build_experiment(const RunConfig& config);
meta::TaskSource task_source(const RunConfig& config, const tasks::TaskBank& bank);

struct BenchmarkRow {
  meta::Engine engine = meta::Engine::Forml;
  double inner_time_s = 0.0;
  double outer_time_s = 0.0;
  double inner_ratio = 0.0;  // engine / FORML
  double outer_ratio = 0.0;
};

/// Mean per-iteration phase times of FORML, FOMAML and EXACT_EUCLID over
/// `iters` measured outer iterations after `warmup` discarded ones.
std::vector<BenchmarkRow> run_benchmark(const RunConfig& config, int warmup, int iters);
void write_benchmark_csv(const std::filesystem::path& path, const std::vector<BenchmarkRow>& rows);

/// CLI entry points. Each returns the process exit status.
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_gradcheck(const RunConfig& config, std::ostream& out);
int cmd_benchmark(const RunConfig& config, std::ostream& out);
int cmd_eval(const RunConfig& config, int episodes, std::ostream& out);

}  // namespace forml::harness
