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

#include <cstddef>
#include <string_view>

#include "forml/matrix.hpp"
#include "forml/rng.hpp"

namespace forml::manifold {

/// Bound used by the point/tangent type invariants. Fresh operator outputs are
/// tested against the tighter 1e-9 in the test suite; this one leaves room for
/// drift accumulated over many retractions.
inline constexpr double kInvariantTolerance = 1e-8;

/// ||x^T x - I||_F
double orthonormality_residual(const Matrix& x);

/// An n x p matrix with orthonormal columns.
///
/// A point built with relaxed() skips the orthonormality check. Relaxed points
/// come out of the additive retraction and from finite-difference perturbation
/// of the meta-parameters; they are never produced by the polar retraction.
class StiefelPoint {
 public:
  /// Throws ShapeError if n < p and PreconditionError if the residual exceeds
  /// kInvariantTolerance.
  explicit StiefelPoint(Matrix value);

  static StiefelPoint relaxed(Matrix value);

  const Matrix& value() const noexcept { return value_; }
  std::size_t n() const noexcept { return value_.rows(); }
  std::size_t p() const noexcept { return value_.cols(); }
  bool is_relaxed() const noexcept { return relaxed_; }

 private:
  struct Unchecked {};
  StiefelPoint(Matrix value, Unchecked) : value_(std::move(value)), relaxed_(true) {}

  Matrix value_;
  bool relaxed_ = false;
};

/// A tangent vector together with the point it is attached to.
class TangentVec {
 public:
  /// Checks tangency ||P^T V + V^T P||_F < kInvariantTolerance unless the base is
  /// relaxed.
  TangentVec(StiefelPoint base, Matrix value);

  const Matrix& value() const noexcept { return value_; }
  const StiefelPoint& base() const noexcept { return base_; }

 private:
  StiefelPoint base_;
  Matrix value_;
};

enum class RetractionMode { Polar, Additive };

/// u - P sym(P^T u)
TangentVec project(const StiefelPoint& p, const Matrix& u);

/// Polar: uf(P + V). Additive: P + V as a relaxed point.
StiefelPoint retract(const StiefelPoint& p, const TangentVec& v, RetractionMode mode);

/// Vector transport by re-projection at the destination.
TangentVec transport(const StiefelPoint& from, const StiefelPoint& to, const TangentVec& w);

/// uf(G) for G with i.i.d. standard normal entries.
StiefelPoint random_point(std::size_t n, std::size_t p, Rng& rng);

/// ||P^T V + V^T P||_F
double tangency_residual(const Matrix& base, const Matrix& v);

// Matrix-level forms of the Stiefel operators, without the type checks.
Matrix project_matrix(const Matrix& p, const Matrix& u);
Matrix retract_matrix(const Matrix& p, const Matrix& v, RetractionMode mode);

/// Euclidean manifold: identity projection, additive retraction, identity transport.
namespace euclidean {
Matrix project(const Matrix& base, const Matrix& u);
Matrix retract(const Matrix& base, const Matrix& v);
Matrix transport(const Matrix& from, const Matrix& to, const Matrix& w);
}  // namespace euclidean

/// The manifold a parameter block lives on; the meta-engines dispatch on this.
struct ManifoldKind {
  enum class Tag { Stiefel, Euclidean };
  Tag tag = Tag::Stiefel;
  RetractionMode retraction = RetractionMode::Polar;  // ignored for Euclidean

  static ManifoldKind stiefel(RetractionMode mode = RetractionMode::Polar) {
    return {Tag::Stiefel, mode};
  }
  static ManifoldKind euclid() { return {Tag::Euclidean, RetractionMode::Polar}; }

  bool is_stiefel() const noexcept { return tag == Tag::Stiefel; }
  bool operator==(const ManifoldKind&) const = default;

  Matrix project(const Matrix& base, const Matrix& u) const;
  Matrix retract(const Matrix& base, const Matrix& v) const;
  Matrix transport(const Matrix& from, const Matrix& to, const Matrix& w) const;
  /// Wraps a retraction result: strict for Stiefel+Polar, relaxed otherwise.
  StiefelPoint make_point(Matrix value) const;
};

std::string_view to_string(RetractionMode mode);
std::string_view to_string(ManifoldKind::Tag tag);

}  // namespace forml::manifold
