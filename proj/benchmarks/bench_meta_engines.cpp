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


#include <benchmark/benchmark.h>

#include <cstddef>
#include <vector>

#include "forml/linalg.hpp"
#include "forml/meta.hpp"
#include "forml/model.hpp"
#include "forml/rng.hpp"
#include "forml/stiefel.hpp"
#include "forml/tasks.hpp"

namespace {

using namespace forml;

const manifold::ManifoldKind kPolar = manifold::ManifoldKind::stiefel(manifold::RetractionMode::Polar);

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
  return m;
}

// 5-way 1-shot, 15 queries, d_in 16, one hidden layer of 64.
struct Fixture {
  model::ModelParams theta;
  meta::TaskLosses losses;

  Fixture()
      : theta(model::init_params(std::vector<std::size_t>{16, 64}, 5, model::Activation::Tanh,
                                 10.0, 3)) {
    const auto banks = tasks::make_bank(100, 16, 0.3, {0.64, 0.16, 0.2}, 1);
    Rng rng(2);
    losses = meta::classification_losses(theta, tasks::sample_episode(banks.train, 5, 1, 15, rng));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_InnerAdapt(benchmark::State& state) {
  const Fixture& f = fixture();
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::inner_adapt(f.theta, f.losses.support, 0.1, steps, kPolar));
  }
}
BENCHMARK(BM_InnerAdapt)->Arg(1)->Arg(5);

void BM_FormlMetaGradient(benchmark::State& state) {
  const Fixture& f = fixture();
  const int steps = static_cast<int>(state.range(0));
  const auto traj = meta::inner_adapt(f.theta, f.losses.support, 0.1, steps, kPolar);
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::forml_meta_gradient(traj, f.losses.query, 0.1, kPolar));
  }
}
BENCHMARK(BM_FormlMetaGradient)->Arg(1)->Arg(5);

void BM_FomamlMetaGradient(benchmark::State& state) {
  const Fixture& f = fixture();
  const int steps = static_cast<int>(state.range(0));
  const auto traj = meta::inner_adapt(f.theta, f.losses.support, 0.1, steps, kPolar);
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::fomaml_meta_gradient(traj, f.losses.query));
  }
}
BENCHMARK(BM_FomamlMetaGradient)->Arg(1)->Arg(5);

// Includes the inner loop, which is recorded on the same tape.
void BM_ExactUnrolled(benchmark::State& state) {
  const Fixture& f = fixture();
  const int steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::exact_unrolled_euclid(f.theta, f.losses, 0.1, steps));
  }
}
BENCHMARK(BM_ExactUnrolled)->Arg(1)->Arg(5);

void BM_FactorExplicit(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Matrix phi = manifold::random_point(n, 5, rng).value();
  const Matrix gs = gaussian(n, 5, rng);
  const Matrix gq = gaussian(n, 5, rng);
  for (auto _ : state) {
    const Matrix h = meta::first_order_factor(phi, gs, 0.1);
    benchmark::DoNotOptimize(matmul(h.transpose(), vec(gq)));
  }
}
BENCHMARK(BM_FactorExplicit)->Arg(16)->Arg(64);

void BM_FactorFast(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  const Matrix phi = manifold::random_point(n, 5, rng).value();
  const Matrix gs = gaussian(n, 5, rng);
  const Matrix gq = gaussian(n, 5, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(meta::apply_factor_fast(gq, phi, gs, 0.1));
  }
}
BENCHMARK(BM_FactorFast)->Arg(16)->Arg(64);

void BM_PolarRetraction(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  const Matrix phi = manifold::random_point(n, 5, rng).value();
  const Matrix v = manifold::project_matrix(phi, gaussian(n, 5, rng));
  for (auto _ : state) {
    benchmark::DoNotOptimize(manifold::retract_matrix(phi, 0.1 * v, manifold::RetractionMode::Polar));
  }
}
BENCHMARK(BM_PolarRetraction)->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
