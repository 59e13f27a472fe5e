// Copyright 2026 The ISR Authors.
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

/**
 * Dense linear-algebra primitives shared by every subspace-recovery routine.
 *
 * All decompositions are made deterministic: each returned vector is flipped
 * so that its largest-magnitude entry (first one on ties) is positive, and
 * equal eigenvalues keep the order produced by the underlying solver.
 * Subspaces are carried as row-orthonormal matrices (`OrthonormalBasis`).
 */
#ifndef ISR_NUMERICS_HPP_
#define ISR_NUMERICS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "isr/error.hpp"

namespace isr {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class Ordering { Ascending, AscendingAbs, Descending };

template <typename Scalar>
struct Spectrum {
  Vector<Scalar> values;
  Ordering ordering = Ordering::Ascending;

  Index size() const { return values.size(); }

  bool is_ordered() const {
    for (Index i = 1; i < values.size(); ++i) {
      const Scalar a = values(i - 1);
      const Scalar b = values(i);
      switch (ordering) {
        case Ordering::Ascending:
          if (a > b) return false;
          break;
        case Ordering::AscendingAbs:
          if (std::abs(a) > std::abs(b)) return false;
          break;
        case Ordering::Descending:
          if (a < b) return false;
          break;
      }
    }
    return true;
  }
};

/// A q-dimensional subspace of R^d stored as a q x d matrix with orthonormal
/// rows.
template <typename Scalar>
class OrthonormalBasis {
 public:
  OrthonormalBasis() = default;

  /// Validates `rows * rows^T == I` to within `tol` (max-abs deviation).
  static OrthonormalBasis from_rows(Matrix<Scalar> rows,
                                    Scalar tol = Scalar(1e-10)) {
    if (!rows.allFinite()) {
      throw Error(ErrorCode::InvalidMatrix, "basis has non-finite entries");
    }
    if (rows.rows() > rows.cols()) {
      throw Error(ErrorCode::InvalidMatrix,
                  "basis has more rows than ambient dimension");
    }
    if (rows.rows() > 0) {
      const Matrix<Scalar> gram = rows * rows.transpose();
      const Scalar dev =
          (gram - Matrix<Scalar>::Identity(rows.rows(), rows.rows()))
              .cwiseAbs()
              .maxCoeff();
      if (!(dev <= tol)) {
        throw Error(ErrorCode::InvalidMatrix,
                    "rows are not orthonormal (deviation " +
                        std::to_string(static_cast<double>(dev)) + ")");
      }
    }
    OrthonormalBasis b;
    b.rows_ = std::move(rows);
    return b;
  }

  /// The zero-dimensional subspace of R^d.
  static OrthonormalBasis empty(Index ambient) {
    OrthonormalBasis b;
    b.rows_.resize(0, ambient);
    return b;
  }

  static OrthonormalBasis identity(Index ambient) {
    OrthonormalBasis b;
    b.rows_ = Matrix<Scalar>::Identity(ambient, ambient);
    return b;
  }

  const Matrix<Scalar>& rows() const { return rows_; }
  Index dim() const { return rows_.rows(); }
  Index ambient() const { return rows_.cols(); }

  /// Orthogonal projector onto the subspace, d x d.
  Matrix<Scalar> projector() const { return rows_.transpose() * rows_; }

 private:
  Matrix<Scalar> rows_;
};

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& a, const char* what) {
  if (!a.allFinite()) {
    throw Error(ErrorCode::InvalidMatrix,
                std::string(what) + ": non-finite entries");
  }
}

// Flip each row so its largest-magnitude entry is positive. Returns the
// applied signs so paired factors can be flipped consistently.
template <typename Scalar>
Vector<Scalar> sign_normalize_rows(Matrix<Scalar>& rows) {
  Vector<Scalar> signs = Vector<Scalar>::Ones(rows.rows());
  for (Index i = 0; i < rows.rows(); ++i) {
    Index arg = 0;
    Scalar best = Scalar(-1);
    for (Index j = 0; j < rows.cols(); ++j) {
      const Scalar m = std::abs(rows(i, j));
      if (m > best) {
        best = m;
        arg = j;
      }
    }
    if (rows.cols() > 0 && rows(i, arg) < Scalar(0)) {
      rows.row(i) *= Scalar(-1);
      signs(i) = Scalar(-1);
    }
  }
  return signs;
}

}  // namespace detail

template <typename Scalar>
struct SymEig {
  Spectrum<Scalar> values;          ///< ascending
  OrthonormalBasis<Scalar> vectors;  ///< row i is the eigenvector of values(i)
};

/// Eigendecomposition of a symmetric matrix, a = V^T diag(values) V with V the
/// returned rows. Input is symmetrized as (a + a^T) / 2 first.
template <typename Derived>
SymEig<typename Derived::Scalar> sym_eig(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::InvalidMatrix, "sym_eig: matrix is not square");
  }
  detail::require_finite(a, "sym_eig");
  const Index d = a.rows();
  SymEig<Scalar> out;
  out.values.ordering = Ordering::Ascending;
  if (d == 0) {
    out.vectors = OrthonormalBasis<Scalar>::empty(0);
    return out;
  }
  const Matrix<Scalar> sym = (a + a.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::InvalidMatrix, "sym_eig: solver did not converge");
  }
  out.values.values = solver.eigenvalues();
  Matrix<Scalar> rows = solver.eigenvectors().transpose();
  detail::sign_normalize_rows(rows);
  out.vectors = OrthonormalBasis<Scalar>::from_rows(std::move(rows),
                                                    Scalar(1e-9));
  return out;
}

template <typename Scalar>
struct Svd {
  OrthonormalBasis<Scalar> left;   ///< r x m, r = min(m, n)
  Spectrum<Scalar> values;         ///< descending, length r
  OrthonormalBasis<Scalar> right;  ///< r x n
};

/// Thin SVD with a = left^T diag(values) right. Left singular vectors are
/// sign-normalized and the matching right vectors flipped alongside.
template <typename Derived>
Svd<typename Derived::Scalar> svd(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(a, "svd");
  const Index m = a.rows();
  const Index n = a.cols();
  const Index r = std::min(m, n);
  Svd<Scalar> out;
  out.values.ordering = Ordering::Descending;
  if (r == 0) {
    out.values.values.resize(0);
    out.left = OrthonormalBasis<Scalar>::empty(m);
    out.right = OrthonormalBasis<Scalar>::empty(n);
    return out;
  }
  const Matrix<Scalar> dense = a;
  Eigen::JacobiSVD<Matrix<Scalar>> solver(dense, Eigen::ComputeThinU |
                                                     Eigen::ComputeThinV);
  out.values.values = solver.singularValues();
  Matrix<Scalar> u = solver.matrixU().transpose();
  Matrix<Scalar> v = solver.matrixV().transpose();
  const Vector<Scalar> signs = detail::sign_normalize_rows(u);
  v = signs.asDiagonal() * v;
  out.left = OrthonormalBasis<Scalar>::from_rows(std::move(u), Scalar(1e-9));
  out.right = OrthonormalBasis<Scalar>::from_rows(std::move(v), Scalar(1e-9));
  return out;
}

/// Number of singular values above rel_tol * (largest singular value).
template <typename Derived>
Index numerical_rank(const Eigen::MatrixBase<Derived>& a,
                     typename Derived::Scalar rel_tol = 1e-8) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  const auto s = svd(a).values.values;
  if (s(0) <= 0) return 0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

/// Orthonormal basis of {v : rows * v = 0}. The rank is decided relative to
/// the largest singular value of `rows`.
template <typename Derived>
OrthonormalBasis<typename Derived::Scalar> null_space(
    const Eigen::MatrixBase<Derived>& rows,
    typename Derived::Scalar rel_tol = 1e-8) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(rows, "null_space");
  const Index d = rows.cols();
  if (rows.rows() == 0) return OrthonormalBasis<Scalar>::identity(d);
  if (d == 0) return OrthonormalBasis<Scalar>::empty(0);

  const Matrix<Scalar> dense = rows;
  Eigen::JacobiSVD<Matrix<Scalar>> solver(dense, Eigen::ComputeFullV);
  const auto& s = solver.singularValues();
  Index rank = 0;
  if (s.size() > 0 && s(0) > Scalar(0)) {
    for (Index i = 0; i < s.size(); ++i) {
      if (s(i) > rel_tol * s(0)) ++rank;
    }
  }
  Matrix<Scalar> basis = solver.matrixV().rightCols(d - rank).transpose();
  detail::sign_normalize_rows(basis);
  return OrthonormalBasis<Scalar>::from_rows(std::move(basis), Scalar(1e-9));
}

/// Principal angles between two equal-dimensional subspaces, ascending.
///
/// Cosines come from the singular values of a * b^T. Small angles are taken
/// from the sines (singular values of the residual of b off span(a)), since
/// arccos loses about half the significant digits near zero.
template <typename Scalar>
Spectrum<Scalar> principal_angles(const OrthonormalBasis<Scalar>& a,
                                  const OrthonormalBasis<Scalar>& b) {
  if (a.ambient() != b.ambient() || a.dim() != b.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "principal_angles: subspaces differ in shape (" +
                    std::to_string(a.dim()) + "x" +
                    std::to_string(a.ambient()) + " vs " +
                    std::to_string(b.dim()) + "x" +
                    std::to_string(b.ambient()) + ")");
  }
  Spectrum<Scalar> out;
  out.ordering = Ordering::Ascending;
  const Index q = a.dim();
  out.values.resize(q);
  if (q == 0) return out;

  const Matrix<Scalar> cross = a.rows() * b.rows().transpose();
  Eigen::JacobiSVD<Matrix<Scalar>> cos_svd(cross);
  const Vector<Scalar> cosines = cos_svd.singularValues();  // descending

  const Matrix<Scalar> residual = b.rows() - cross.transpose() * a.rows();
  Eigen::JacobiSVD<Matrix<Scalar>> sin_svd(residual);
  Vector<Scalar> sines = sin_svd.singularValues();  // descending
  sines.reverseInPlace();                           // ascending

  const Scalar half = Scalar(0.5);
  for (Index i = 0; i < q; ++i) {
    const Scalar c = std::clamp(cosines(i), Scalar(0), Scalar(1));
    const Scalar s = std::clamp(sines(i), Scalar(0), Scalar(1));
    out.values(i) = (c * c >= half) ? std::asin(s) : std::acos(c);
  }
  std::sort(out.values.data(), out.values.data() + q);
  return out;
}

/// Largest angle between a vector of span(from) and the subspace span(to).
/// Unlike principal_angles the dimensions may differ; zero iff
/// span(from) is contained in span(to).
template <typename Scalar>
Scalar containment_angle(const OrthonormalBasis<Scalar>& from,
                         const OrthonormalBasis<Scalar>& to) {
  if (from.ambient() != to.ambient()) {
    throw Error(ErrorCode::DimensionMismatch,
                "containment_angle: ambient dimensions differ");
  }
  if (from.dim() == 0) return Scalar(0);
  const Matrix<Scalar> residual =
      from.rows() - (from.rows() * to.rows().transpose()) * to.rows();
  Eigen::JacobiSVD<Matrix<Scalar>> solver(residual);
  const Scalar s = solver.singularValues()(0);
  return std::asin(std::clamp(s, Scalar(0), Scalar(1)));
}

/// Flag mean of a set of subspaces: the top-r left singular vectors of the
/// column concatenation of the transposed bases.
template <typename Scalar>
OrthonormalBasis<Scalar> flag_mean(std::span<const OrthonormalBasis<Scalar>> bases,
                                   Index r) {
  if (bases.empty()) {
    throw Error(ErrorCode::EmptyInput, "flag_mean: no subspaces given");
  }
  const Index d = bases.front().ambient();
  Index cols = 0;
  for (const auto& b : bases) {
    if (b.ambient() != d) {
      throw Error(ErrorCode::DimensionMismatch,
                  "flag_mean: ambient dimensions differ");
    }
    cols += b.dim();
  }
  if (r < 0 || r > d) {
    throw Error(ErrorCode::InvalidParameter,
                "flag_mean: r must lie in [0, d]");
  }
  if (r == 0) return OrthonormalBasis<Scalar>::empty(d);
  if (cols < r) {
    throw Error(ErrorCode::InvalidParameter,
                "flag_mean: concatenation has fewer columns than r");
  }
  Matrix<Scalar> stacked(d, cols);
  Index c = 0;
  for (const auto& b : bases) {
    stacked.middleCols(c, b.dim()) = b.rows().transpose();
    c += b.dim();
  }
  const auto dec = svd(stacked);
  return OrthonormalBasis<Scalar>::from_rows(dec.left.rows().topRows(r),
                                             Scalar(1e-9));
}

/// Singular values of the flag-mean concatenation (descending).
template <typename Scalar>
Spectrum<Scalar> flag_mean_spectrum(
    std::span<const OrthonormalBasis<Scalar>> bases) {
  if (bases.empty()) {
    throw Error(ErrorCode::EmptyInput, "flag_mean: no subspaces given");
  }
  const Index d = bases.front().ambient();
  Index cols = 0;
  for (const auto& b : bases) cols += b.dim();
  Matrix<Scalar> stacked(d, cols);
  Index c = 0;
  for (const auto& b : bases) {
    stacked.middleCols(c, b.dim()) = b.rows().transpose();
    c += b.dim();
  }
  return svd(stacked).values;
}

/// Random d x d orthogonal matrix: QR of a standard Gaussian draw with the
/// triangular factor's diagonal forced positive, then the usual row sign
/// convention (so d = 1 always yields [[+1]]).
template <typename Scalar = double, typename Rng>
OrthonormalBasis<Scalar> random_orthonormal(Index d, Rng& rng) {
  if (d < 1) {
    throw Error(ErrorCode::InvalidParameter, "random_orthonormal: d < 1");
  }
  std::normal_distribution<Scalar> normal(Scalar(0), Scalar(1));
  Matrix<Scalar> g(d, d);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) g(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix<Scalar>> qr(g);
  Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(d, d);
  const Matrix<Scalar>& packed = qr.matrixQR();
  for (Index j = 0; j < d; ++j) {
    if (packed(j, j) < Scalar(0)) q.col(j) *= Scalar(-1);
  }
  detail::sign_normalize_rows(q);
  return OrthonormalBasis<Scalar>::from_rows(std::move(q));
}

}  // namespace isr

#endif  // ISR_NUMERICS_HPP_
