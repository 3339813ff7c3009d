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

#include "forml/stiefel.hpp"

#include <string>

#include "forml/errors.hpp"
#include "forml/linalg.hpp"

namespace forml::manifold {

double orthonormality_residual(const Matrix& x) {
  Matrix g = matmul(x.transpose(), x);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_norm(g);
}

double tangency_residual(const Matrix& base, const Matrix& v) {
  const Matrix ptv = matmul(base.transpose(), v);
  return frobenius_norm(ptv + ptv.transpose());
}

StiefelPoint::StiefelPoint(Matrix value) : value_(std::move(value)) {
  if (value_.rows() < value_.cols()) {
    throw ShapeError("StiefelPoint: requires n >= p, got " + value_.shape_string());
  }
  const double r = orthonormality_residual(value_);
  if (!(r < kInvariantTolerance)) {
    throw PreconditionError("StiefelPoint: columns not orthonormal (residual " +
                            std::to_string(r) + ")");
  }
}

StiefelPoint StiefelPoint::relaxed(Matrix value) {
  if (value.rows() < value.cols()) {
    throw ShapeError("StiefelPoint: requires n >= p, got " + value.shape_string());
  }
  return StiefelPoint(std::move(value), Unchecked{});
}

TangentVec::TangentVec(StiefelPoint base, Matrix value)
    : base_(std::move(base)), value_(std::move(value)) {
  require_same_shape(base_.value(), value_, "TangentVec");
  if (!base_.is_relaxed()) {
    const double r = tangency_residual(base_.value(), value_);
    if (!(r < kInvariantTolerance)) {
      throw PreconditionError("TangentVec: not tangent at base (residual " + std::to_string(r) +
                              ")");
    }
  }
}

Matrix project_matrix(const Matrix& p, const Matrix& u) {
  require_same_shape(p, u, "project");
  return u - matmul(p, sym(matmul(p.transpose(), u)));
}

Matrix retract_matrix(const Matrix& p, const Matrix& v, RetractionMode mode) {
  require_same_shape(p, v, "retract");
  Matrix moved = p + v;
  if (mode == RetractionMode::Additive) return moved;
  return uf(moved);
}

TangentVec project(const StiefelPoint& p, const Matrix& u) {
  return TangentVec(p, project_matrix(p.value(), u));
}

StiefelPoint retract(const StiefelPoint& p, const TangentVec& v, RetractionMode mode) {
  if (!(v.base().value() == p.value())) {
    throw PreconditionError("retract: tangent vector is not based at this point");
  }
  Matrix moved = retract_matrix(p.value(), v.value(), mode);
  if (mode == RetractionMode::Additive) return StiefelPoint::relaxed(std::move(moved));
  return StiefelPoint(std::move(moved));
}

TangentVec transport(const StiefelPoint& from, const StiefelPoint& to, const TangentVec& w) {
  if (!(w.base().value() == from.value())) {
    throw PreconditionError("transport: tangent vector is not based at the source point");
  }
  require_same_shape(from.value(), to.value(), "transport");
  return project(to, w.value());
}

StiefelPoint random_point(std::size_t n, std::size_t p, Rng& rng) {
  if (n < p) {
    throw ShapeError("random_point: requires n >= p, got n=" + std::to_string(n) +
                     " p=" + std::to_string(p));
  }
  Matrix g(n, p);
  for (double& v : g.data()) v = rng.normal();
  return StiefelPoint(uf(g));
}

namespace euclidean {

Matrix project(const Matrix& base, const Matrix& u) {
  require_same_shape(base, u, "euclidean::project");
  return u;
}

Matrix retract(const Matrix& base, const Matrix& v) {
  require_same_shape(base, v, "euclidean::retract");
  return base + v;
}

Matrix transport(const Matrix& from, const Matrix& to, const Matrix& w) {
  require_same_shape(from, to, "euclidean::transport");
  require_same_shape(from, w, "euclidean::transport");
  return w;
}

}  // namespace euclidean

Matrix ManifoldKind::project(const Matrix& base, const Matrix& u) const {
  return is_stiefel() ? project_matrix(base, u) : euclidean::project(base, u);
}

Matrix ManifoldKind::retract(const Matrix& base, const Matrix& v) const {
  return is_stiefel() ? retract_matrix(base, v, retraction) : euclidean::retract(base, v);
}

Matrix ManifoldKind::transport(const Matrix& from, const Matrix& to, const Matrix& w) const {
  if (!is_stiefel()) return euclidean::transport(from, to, w);
  require_same_shape(from, to, "transport");
  return project_matrix(to, w);
}

StiefelPoint ManifoldKind::make_point(Matrix value) const {
  if (is_stiefel() && retraction == RetractionMode::Polar) return StiefelPoint(std::move(value));
  return StiefelPoint::relaxed(std::move(value));
}

std::string_view to_string(RetractionMode mode) {
  return mode == RetractionMode::Polar ? "polar" : "additive";
}

std::string_view to_string(ManifoldKind::Tag tag) {
  return tag == ManifoldKind::Tag::Stiefel ? "stiefel" : "euclidean";
}

}  // namespace forml::manifold
