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

#include <vector>

#include "forml/matrix.hpp"

namespace forml {

/// Symmetric part (x + x^T) / 2 of a square matrix.
Matrix sym(const Matrix& x);

/// Column-stacking vectorization: column j of x occupies entries
/// [j * rows, (j + 1) * rows). With this convention
/// vec(A X B) == kron(B^T, A) * vec(X).
Matrix vec(const Matrix& x);

/// Inverse of vec(): reshapes a rows*cols column vector back to rows x cols.
Matrix unvec(const Matrix& v, std::size_t rows, std::size_t cols);

/// Kronecker product, block (i, j) equal to a(i, j) * b.
Matrix kron(const Matrix& a, const Matrix& b);

/// Kronecker sum a (+) b = kron(a, I_n) + kron(I_p, b) for a p x p, b n x n.
Matrix kron_sum(const Matrix& a, const Matrix& b);

struct SymmetricEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic Jacobi eigensolver for a symmetric matrix.
///
/// Sweeps until the off-diagonal Frobenius norm falls below
/// kJacobiTolerance * max(1, ||s||_F) or kJacobiMaxSweeps is reached.
SymmetricEigen sym_eig(const Matrix& s);

/// Polar factor x (x^T x)^(-1/2) of a tall matrix (n >= p), polished with
/// up to kPolarRefineSteps Newton-Schulz steps. Throws SingularityError when
/// the smallest Gram eigenvalue is below kGramSingularity.
Matrix uf(const Matrix& x);

inline constexpr double kJacobiTolerance = 1e-14;
inline constexpr int kJacobiMaxSweeps = 100;
inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kGramSingularity = 1e-12;
inline constexpr int kPolarRefineSteps = 3;
inline constexpr double kPolarRefineTolerance = 1e-15;

}  // namespace forml
