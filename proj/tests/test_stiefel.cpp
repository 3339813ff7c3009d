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

#include <chrono>
#include <fstream>
#include <sstream>

#include "forml/errors.hpp"
#include "forml/linalg.hpp"
#include "forml/stiefel.hpp"
#include "test_util.hpp"

namespace forml::manifold {
namespace {

using testing::random_matrix;

Matrix load_golden(const std::string& name, std::size_t rows, std::size_t cols) {
  std::ifstream in(std::string(FORML_TEST_DATA_DIR) + "/" + name);
  EXPECT_TRUE(in.good()) << name;
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    double v;
    while (row >> v) values.push_back(v);
  }
  return Matrix(rows, cols, values);
}

TEST(Stiefel, RandomPointMatchesGolden) {
  Rng rng(42);
  const StiefelPoint p = random_point(5, 3, rng);
  const Matrix golden = load_golden("random_point_n5_p3_seed42.txt", 5, 3);
  EXPECT_TRUE(testing::matrices_near(p.value(), golden, 1e-12));
}

TEST(Stiefel, InvariantsOverRandomTrials) {
  Rng rng(99);
  double tangency = 0.0, idempotence = 0.0, orthonormality = 0.0, transported = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 8;
    const std::size_t p = 1 + rng.next_u64() % n;
    const StiefelPoint x = random_point(n, p, rng);
    const Matrix u = random_matrix(n, p, rng);
    const TangentVec v = project(x, u);
    tangency = std::max(tangency, tangency_residual(x.value(), v.value()));
    idempotence = std::max(idempotence, max_abs(project_matrix(x.value(), v.value()) - v.value()));
    const StiefelPoint y = retract(x, v, RetractionMode::Polar);
    orthonormality = std::max(orthonormality, orthonormality_residual(y.value()));
    const TangentVec w = transport(x, y, v);
    transported = std::max(transported, tangency_residual(y.value(), w.value()));
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(tangency, 1e-9);
  EXPECT_LT(idempotence, 1e-12);
  EXPECT_LT(orthonormality, 1e-9);
  EXPECT_LT(transported, 1e-9);
  EXPECT_LT(seconds, 10.0);
}

TEST(Stiefel, ProjectionAtIdentityColumnsKeepsSkewPart) {
  const StiefelPoint x(Matrix{{1, 0}, {0, 1}, {0, 0}});
  const Matrix u{{1, 2}, {3, 4}, {5, 6}};
  // Top block loses its symmetric part, bottom row is untouched.
  const Matrix expected{{0, -0.5}, {0.5, 0}, {5, 6}};
  EXPECT_TRUE(testing::matrices_near(project(x, u).value(), expected, 1e-15));
}

TEST(Stiefel, ZeroStepRetractionIsIdentity) {
  Rng rng(3);
  const StiefelPoint x = random_point(6, 2, rng);
  const TangentVec zero = project(x, Matrix(6, 2));
  EXPECT_LT(max_abs(retract(x, zero, RetractionMode::Polar).value() - x.value()), 1e-14);
  EXPECT_EQ(retract(x, zero, RetractionMode::Additive).value(), x.value());
}

TEST(Stiefel, AdditiveRetractionLeavesManifoldAndIsRelaxed) {
  Rng rng(4);
  const StiefelPoint x = random_point(5, 3, rng);
  const TangentVec v = project(x, random_matrix(5, 3, rng));
  const StiefelPoint y = retract(x, v, RetractionMode::Additive);
  EXPECT_TRUE(y.is_relaxed());
  EXPECT_EQ(y.value(), x.value() + v.value());
  EXPECT_GT(orthonormality_residual(y.value()), 1e-6);
}

TEST(Stiefel, TypedOperatorsRejectMisuse) {
  Rng rng(8);
  EXPECT_THROW(StiefelPoint(Matrix{{1, 0}, {0, 2}}), PreconditionError);
  EXPECT_THROW(StiefelPoint(Matrix(2, 3)), ShapeError);
  EXPECT_THROW(random_point(2, 3, rng), ShapeError);
  const StiefelPoint x = random_point(4, 2, rng);
  const StiefelPoint y = random_point(4, 2, rng);
  EXPECT_THROW(TangentVec(x, Matrix(4, 2, 1.0)), PreconditionError);
  EXPECT_THROW(project(x, Matrix(3, 2)), ShapeError);
  const TangentVec v = project(x, random_matrix(4, 2, rng));
  EXPECT_THROW(retract(y, v, RetractionMode::Polar), PreconditionError);
}

TEST(Stiefel, PolarRetractionReportsSingularStep) {
  // P + v with v = -P collapses to zero.
  const StiefelPoint x(Matrix{{1, 0}, {0, 1}, {0, 0}});
  EXPECT_THROW(retract_matrix(x.value(), -x.value(), RetractionMode::Polar), SingularityError);
}

TEST(Stiefel, EuclideanOperatorsAreTrivial) {
  Rng rng(12);
  const Matrix base = random_matrix(4, 3, rng);
  const Matrix u = random_matrix(4, 3, rng);
  EXPECT_EQ(euclidean::project(base, u), u);
  EXPECT_EQ(euclidean::retract(base, u), base + u);
  EXPECT_EQ(euclidean::transport(base, u, u), u);
}

TEST(Stiefel, ManifoldKindDispatch) {
  Rng rng(13);
  const StiefelPoint x = random_point(5, 2, rng);
  const Matrix u = random_matrix(5, 2, rng);
  const auto polar = ManifoldKind::stiefel();
  const auto euclid = ManifoldKind::euclid();
  EXPECT_TRUE(polar.is_stiefel());
  EXPECT_FALSE(euclid.is_stiefel());
  EXPECT_EQ(polar.project(x.value(), u), project_matrix(x.value(), u));
  EXPECT_EQ(euclid.project(x.value(), u), u);
  EXPECT_EQ(euclid.retract(x.value(), u), x.value() + u);
  EXPECT_FALSE(polar.make_point(x.value()).is_relaxed());
  EXPECT_TRUE(euclid.make_point(u).is_relaxed());
  EXPECT_EQ(to_string(RetractionMode::Additive), "additive");
  EXPECT_EQ(to_string(ManifoldKind::Tag::Euclidean), "euclidean");
}

}  // namespace
}  // namespace forml::manifold
