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

#include "forml/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "forml/errors.hpp"

namespace forml {

Matrix sym(const Matrix& x) {
  if (!x.is_square()) throw ShapeError("sym: non-square " + x.shape_string());
  Matrix s(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) s(i, j) = 0.5 * (x(i, j) + x(j, i));
  return s;
}

Matrix vec(const Matrix& x) {
  Matrix v(x.size(), 1);
  for (std::size_t j = 0; j < x.cols(); ++j)
    for (std::size_t i = 0; i < x.rows(); ++i) v(j * x.rows() + i, 0) = x(i, j);
  return v;
}

Matrix unvec(const Matrix& v, std::size_t rows, std::size_t cols) {
  if (v.cols() != 1 || v.rows() != rows * cols) {
    throw ShapeError("unvec: " + v.shape_string() + " into (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ")");
  }
  Matrix x(rows, cols);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) x(i, j) = v(j * rows + i, 0);
  return x;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c)
          k(i * b.rows() + r, j * b.cols() + c) = aij * b(r, c);
    }
  return k;
}

Matrix kron_sum(const Matrix& a, const Matrix& b) {
  if (!a.is_square() || !b.is_square()) {
    throw ShapeError("kron_sum: operands must be square, got " + a.shape_string() + " and " +
                     b.shape_string());
  }
  return kron(a, Matrix::identity(b.rows())) + kron(Matrix::identity(a.rows()), b);
}

namespace {

double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

}  // namespace

SymmetricEigen sym_eig(const Matrix& s) {
  if (!s.is_square()) throw ShapeError("sym_eig: non-square " + s.shape_string());
  require_finite(s, "sym_eig");
  const std::size_t n = s.rows();
  const double scale = std::max(1.0, max_abs(s));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(s(i, j) - s(j, i)) > kSymmetryTolerance * scale) {
        throw PreconditionError("sym_eig: input is not symmetric at (" + std::to_string(i) +
                                "," + std::to_string(j) + ")");
      }

  Matrix a = sym(s);
  Matrix v = Matrix::identity(n);
  const double threshold = kJacobiTolerance * std::max(1.0, frobenius_norm(a));

  int sweep = 0;
  while (off_diagonal_norm(a) > threshold) {
    if (sweep++ == kJacobiMaxSweeps) {
      throw NumericError("sym_eig: Jacobi did not converge in " +
                         std::to_string(kJacobiMaxSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle that annihilates a(p, q); numerically stable form.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  require_finite(out.vectors, "sym_eig");
  return out;
}

Matrix uf(const Matrix& x) {
  if (x.rows() < x.cols()) throw ShapeError("uf: requires n >= p, got " + x.shape_string());
  require_finite(x, "uf");
  const Matrix gram = matmul(x.transpose(), x);
  const SymmetricEigen eig = sym_eig(gram);
  const double min_eig = eig.values.empty() ? 1.0 : eig.values.front();
  if (!(min_eig > kGramSingularity)) {
    throw SingularityError("uf: Gram matrix is singular (min eigenvalue " +
                               std::to_string(min_eig) + ")",
                           min_eig);
  }
  // (x^T x)^(-1/2) = V diag(lambda^(-1/2)) V^T
  Matrix scaled = eig.vectors;
  for (std::size_t c = 0; c < scaled.cols(); ++c) {
    const double f = 1.0 / std::sqrt(eig.values[c]);
    for (std::size_t r = 0; r < scaled.rows(); ++r) scaled(r, c) *= f;
  }
  Matrix result = matmul(x, matmul(scaled, eig.vectors.transpose()));
  require_finite(result, "uf");
  // Newton-Schulz: Q <- Q - Q (Q^T Q - I) / 2. The Gram route loses accuracy
  // as cond(x)^2; each step squares the remaining orthonormality error.
  const Matrix eye = Matrix::identity(x.cols());
  for (int step = 0; step < kPolarRefineSteps; ++step) {
    const Matrix residual = matmul(result.transpose(), result) - eye;
    if (max_abs(residual) <= kPolarRefineTolerance) break;
    result -= 0.5 * matmul(result, residual);
  }
  return result;
}

}  // namespace forml
