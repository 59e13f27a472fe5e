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
 * Invariant-feature subspace recovery.
 *
 * Each fit reads per-environment moments from a `MomentSource` (sample
 * estimates or exact population moments) and splits R^d into a spurious
 * subspace, identified from how the moments move across environments, and
 * its orthogonal complement, the invariant subspace. A downstream predictor
 * is then trained on `apply_projection(proj, x)` or on
 * `subspace_scale(proj, x, alpha)`.
 *
 * Example:
 * @code
 *   isr::IsrConfig cfg;
 *   cfg.d_s = 5;
 *   auto proj = isr::isr_mean(train, cfg);
 *   Eigen::MatrixXd z = isr::apply_projection(proj, train_x);
 * @endcode
 */
#ifndef ISR_ISR_HPP_
#define ISR_ISR_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isr/datamodel.hpp"
#include "isr/error.hpp"
#include "isr/numerics.hpp"

namespace isr {

enum class IsrMethod { Mean, Cov, CovRobust, Multiclass, Regression };

inline std::string_view to_string(IsrMethod m) {
  switch (m) {
    case IsrMethod::Mean: return "mean";
    case IsrMethod::Cov: return "cov";
    case IsrMethod::CovRobust: return "cov_robust";
    case IsrMethod::Multiclass: return "multiclass";
    case IsrMethod::Regression: return "regression";
  }
  return "unknown";
}

struct IsrConfig {
  /// Spurious dimension. Unset means "auto": count spectrum entries above
  /// rank_tol times the largest, which is only trustworthy near the
  /// population regime.
  std::optional<Index> d_s;
  double rank_tol = 1e-8;
  /// Relative Frobenius gap above which two covariances count as distinct.
  double cov_pair_min_gap = 1e-6;
  /// Pair budget of the robust covariance variant; unset means
  /// min(10, E (E - 1) / 2).
  std::optional<Index> robust_n_pairs;
  double scale_alpha = 0.0;
  /// Class whose conditional moments drive the binary fits.
  int positive_label = 1;

  void validate(Index d) const {
    if (d_s && (*d_s < 0 || *d_s >= d)) {
      throw Error(ErrorCode::InvalidParameter,
                  "d_s must lie in [0, d), got " + std::to_string(*d_s) +
                      " with d = " + std::to_string(d));
    }
    if (!(rank_tol > 0.0) || !(rank_tol < 1.0)) {
      throw Error(ErrorCode::InvalidParameter, "rank_tol must lie in (0, 1)");
    }
    if (!(cov_pair_min_gap >= 0.0)) {
      throw Error(ErrorCode::InvalidParameter,
                  "cov_pair_min_gap must be nonnegative");
    }
    if (robust_n_pairs && *robust_n_pairs < 1) {
      throw Error(ErrorCode::InvalidParameter, "robust_n_pairs must be >= 1");
    }
    if (!(scale_alpha >= 0.0 && scale_alpha <= 1.0)) {
      throw Error(ErrorCode::InvalidParameter,
                  "scale_alpha must lie in [0, 1]");
    }
  }
};

template <typename Scalar>
struct IsrProjection {
  IsrMethod method = IsrMethod::Mean;
  OrthonormalBasis<Scalar> invariant_basis;
  OrthonormalBasis<Scalar> spurious_basis;
  Spectrum<Scalar> spectrum;
  Index d_s_used = 0;
  /// Fewer spurious directions were identifiable than d_s_used.
  bool partial = false;

  Index dim() const { return invariant_basis.ambient(); }
};

namespace detail {

template <typename Scalar>
std::vector<int> fit_env_ids(const MomentSource<Scalar>& src) {
  std::vector<int> ids = src.env_ids();
  if (ids.size() < 2) {
    throw Error(ErrorCode::TooFewEnvironments,
                "need at least 2 labeled environments, got " +
                    std::to_string(ids.size()));
  }
  return ids;
}

template <typename Scalar>
Index resolve_d_s(const IsrConfig& cfg, const Vector<Scalar>& magnitudes,
                  Scalar largest) {
  if (cfg.d_s) return *cfg.d_s;
  Index n = 0;
  for (Index i = 0; i < magnitudes.size(); ++i) {
    if (magnitudes(i) > Scalar(cfg.rank_tol) * largest) ++n;
  }
  return std::min<Index>(n, magnitudes.size() - 1);
}

template <typename Scalar>
struct MeanPca {
  SymEig<Scalar> eig;  // of (1/E) M~^T M~
  bool degenerate = false;
};

template <typename Scalar>
MeanPca<Scalar> centered_pca(const Matrix<Scalar>& m, Scalar rank_tol) {
  const Vector<Scalar> center = m.colwise().mean().transpose();
  const Matrix<Scalar> centered = m.rowwise() - center.transpose();
  MeanPca<Scalar> out;
  out.eig = sym_eig(Matrix<Scalar>(centered.transpose() * centered /
                                   static_cast<Scalar>(m.rows())));
  const Scalar top = std::max(out.eig.values.values.maxCoeff(), Scalar(0));
  const Scalar scale = m.cwiseAbs().maxCoeff();
  out.degenerate = !(std::sqrt(top) > rank_tol * scale);
  return out;
}

template <typename Scalar>
IsrProjection<Scalar> from_mean_rows(const Matrix<Scalar>& m,
                                     const IsrConfig& cfg, IsrMethod method) {
  const Index d = m.cols();
  const Index e = m.rows();
  auto pca = centered_pca(m, Scalar(cfg.rank_tol));
  if (pca.degenerate) {
    throw Error(ErrorCode::DegenerateEnvironments,
                "environment means coincide; no spurious direction visible");
  }
  const auto& values = pca.eig.values.values;
  const Index d_s = resolve_d_s(cfg, values, values(d - 1));
  const Index kept = std::min(d_s, e - 1);

  IsrProjection<Scalar> out;
  out.method = method;
  out.spectrum = pca.eig.values;
  out.d_s_used = d_s;
  out.partial = kept < d_s;
  // Largest eigenvalue first.
  Matrix<Scalar> spurious =
      pca.eig.vectors.rows().bottomRows(kept).colwise().reverse();
  out.spurious_basis =
      OrthonormalBasis<Scalar>::from_rows(std::move(spurious), Scalar(1e-9));
  out.invariant_basis = null_space(out.spurious_basis.rows());
  return out;
}

template <typename Scalar>
Matrix<Scalar> stack_rows(const std::vector<Vector<Scalar>>& rows, Index d) {
  Matrix<Scalar> m(static_cast<Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row(static_cast<Index>(i)) = rows[i].transpose();
  }
  return m;
}

template <typename Scalar>
struct CovPair {
  Index i = 0;
  Index j = 0;
  Scalar gap = 0;
};

template <typename Scalar>
std::vector<CovPair<Scalar>> ranked_pairs(const std::vector<Matrix<Scalar>>& covs,
                                          Scalar min_gap) {
  std::vector<CovPair<Scalar>> pairs;
  const Index e = static_cast<Index>(covs.size());
  for (Index i = 0; i < e; ++i) {
    for (Index j = i + 1; j < e; ++j) {
      const Scalar denom = std::max(covs[i].norm(), covs[j].norm());
      const Scalar gap =
          denom > Scalar(0) ? (covs[i] - covs[j]).norm() / denom : Scalar(0);
      if (gap > min_gap) pairs.push_back({i, j, gap});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.gap > b.gap; });
  if (pairs.empty()) {
    throw Error(ErrorCode::InsufficientVariance,
                "no environment pair has distinct covariances");
  }
  return pairs;
}

template <typename Scalar>
struct AbsEig {
  Spectrum<Scalar> values;  // ascending by |lambda|
  Matrix<Scalar> vectors;   // rows, matching order
};

template <typename Scalar>
AbsEig<Scalar> eig_by_magnitude(const Matrix<Scalar>& delta) {
  const auto eig = sym_eig(delta);
  const Index d = delta.rows();
  std::vector<Index> order(static_cast<std::size_t>(d));
  for (Index i = 0; i < d; ++i) order[static_cast<std::size_t>(i)] = i;
  const auto& v = eig.values.values;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(v(a)) < std::abs(v(b));
  });
  AbsEig<Scalar> out;
  out.values.ordering = Ordering::AscendingAbs;
  out.values.values.resize(d);
  out.vectors.resize(d, d);
  for (Index i = 0; i < d; ++i) {
    const Index src = order[static_cast<std::size_t>(i)];
    out.values.values(i) = v(src);
    out.vectors.row(i) = eig.vectors.rows().row(src);
  }
  return out;
}

template <typename Scalar>
std::vector<Matrix<Scalar>> positive_covs(const MomentSource<Scalar>& src,
                                          const std::vector<int>& ids,
                                          int label) {
  std::vector<Matrix<Scalar>> covs;
  covs.reserve(ids.size());
  for (int id : ids) covs.push_back(src.cond_cov(id, label));
  return covs;
}

}  // namespace detail

/// Mean-based recovery for binary tasks: PCA of the positive-class means
/// across environments. The top min(d_s, E - 1) principal directions are
/// spurious; `partial` is set when E - 1 < d_s.
template <typename Scalar>
IsrProjection<Scalar> isr_mean(const MomentSource<Scalar>& src,
                               const IsrConfig& cfg) {
  cfg.validate(src.dim());
  const auto ids = detail::fit_env_ids(src);
  std::vector<Vector<Scalar>> means;
  for (int id : ids) means.push_back(src.cond_mean(id, cfg.positive_label));
  return detail::from_mean_rows(detail::stack_rows(means, src.dim()), cfg,
                                IsrMethod::Mean);
}

/// Invariant basis taken directly as the d - d_s eigenvectors of smallest
/// eigenvalue of the mean PCA. Coincides with `isr_mean` whenever E > d_s.
template <typename Scalar>
OrthonormalBasis<Scalar> isr_mean_smallest_eigenvectors(
    const MomentSource<Scalar>& src, const IsrConfig& cfg) {
  cfg.validate(src.dim());
  const auto ids = detail::fit_env_ids(src);
  std::vector<Vector<Scalar>> means;
  for (int id : ids) means.push_back(src.cond_mean(id, cfg.positive_label));
  const auto pca = detail::centered_pca(detail::stack_rows(means, src.dim()),
                                        Scalar(cfg.rank_tol));
  const auto& values = pca.eig.values.values;
  const Index d = src.dim();
  const Index d_s = detail::resolve_d_s(cfg, values, values(d - 1));
  return OrthonormalBasis<Scalar>::from_rows(
      pca.eig.vectors.rows().topRows(d - d_s), Scalar(1e-9));
}

/// Covariance-based recovery for binary tasks: eigendecomposition of the
/// difference of positive-class covariances of the most distinct
/// environment pair. The d - d_s eigenvectors of smallest |lambda| are
/// invariant.
template <typename Scalar>
IsrProjection<Scalar> isr_cov(const MomentSource<Scalar>& src,
                              const IsrConfig& cfg) {
  cfg.validate(src.dim());
  const auto ids = detail::fit_env_ids(src);
  const auto covs = detail::positive_covs(src, ids, cfg.positive_label);
  const auto pairs =
      detail::ranked_pairs(covs, Scalar(cfg.cov_pair_min_gap));
  const auto& best = pairs.front();
  const auto eig = detail::eig_by_magnitude(
      Matrix<Scalar>(covs[best.i] - covs[best.j]));
  const Index d = src.dim();
  const Vector<Scalar> mags = eig.values.values.cwiseAbs();
  const Index d_s = detail::resolve_d_s(cfg, mags, mags(d - 1));

  IsrProjection<Scalar> out;
  out.method = IsrMethod::Cov;
  out.spectrum = eig.values;
  out.d_s_used = d_s;
  out.invariant_basis = OrthonormalBasis<Scalar>::from_rows(
      eig.vectors.topRows(d - d_s), Scalar(1e-9));
  out.spurious_basis = OrthonormalBasis<Scalar>::from_rows(
      eig.vectors.bottomRows(d_s), Scalar(1e-9));
  return out;
}

/// Robust covariance-based recovery: per-pair invariant bases of the
/// highest-gap pairs, averaged with the flag mean.
template <typename Scalar>
IsrProjection<Scalar> isr_cov_robust(const MomentSource<Scalar>& src,
                                     const IsrConfig& cfg) {
  cfg.validate(src.dim());
  const auto ids = detail::fit_env_ids(src);
  const auto covs = detail::positive_covs(src, ids, cfg.positive_label);
  const auto pairs =
      detail::ranked_pairs(covs, Scalar(cfg.cov_pair_min_gap));
  const Index e = static_cast<Index>(ids.size());
  const Index budget =
      cfg.robust_n_pairs.value_or(std::min<Index>(10, e * (e - 1) / 2));
  const Index n_pairs = std::min<Index>(budget, static_cast<Index>(pairs.size()));
  const Index d = src.dim();

  std::optional<Index> d_s = cfg.d_s;
  std::vector<OrthonormalBasis<Scalar>> bases;
  for (Index p = 0; p < n_pairs; ++p) {
    const auto& pair = pairs[static_cast<std::size_t>(p)];
    const auto eig = detail::eig_by_magnitude(
        Matrix<Scalar>(covs[pair.i] - covs[pair.j]));
    if (!d_s) {
      const Vector<Scalar> mags = eig.values.values.cwiseAbs();
      d_s = detail::resolve_d_s(cfg, mags, mags(d - 1));
    }
    bases.push_back(OrthonormalBasis<Scalar>::from_rows(
        eig.vectors.topRows(d - *d_s), Scalar(1e-9)));
  }
  const std::span<const OrthonormalBasis<Scalar>> view(bases);

  IsrProjection<Scalar> out;
  out.method = IsrMethod::CovRobust;
  out.spectrum = flag_mean_spectrum(view);
  out.d_s_used = *d_s;
  out.invariant_basis = flag_mean(view, d - *d_s);
  out.spurious_basis = null_space(out.invariant_basis.rows());
  return out;
}

/// Multiclass recovery: per-class PCA of the class-conditional means across
/// environments, the retained directions of all classes concatenated and
/// reduced by SVD. The top d_s left singular vectors are spurious. Each class
/// contributes at most min(E - 1, d_s) directions when d_s is configured.
template <typename Scalar>
IsrProjection<Scalar> isr_multiclass(const MomentSource<Scalar>& src,
                                     const IsrConfig& cfg) {
  const Index d = src.dim();
  cfg.validate(d);
  const Task task = src.task();
  if (!task.is_classification()) {
    throw Error(ErrorCode::InvalidParameter,
                "isr_multiclass needs a classification task");
  }
  const auto ids = detail::fit_env_ids(src);
  const Index e = static_cast<Index>(ids.size());
  const Scalar tol = Scalar(cfg.rank_tol);
  // A class's means move only inside the spurious span.
  const Index per_class = cfg.d_s ? std::min(e - 1, *cfg.d_s) : e - 1;

  std::vector<Vector<Scalar>> columns;
  for (int y = 0; y < task.classes; ++y) {
    std::vector<Vector<Scalar>> means;
    for (int id : ids) means.push_back(src.cond_mean(id, y));
    const auto pca = detail::centered_pca(detail::stack_rows(means, d), tol);
    if (pca.degenerate) continue;
    const auto& values = pca.eig.values.values;
    const Scalar top = values(d - 1);
    for (Index i = d - 1, taken = 0; i >= 0 && taken < per_class; --i, ++taken) {
      if (!(values(i) > tol * top)) break;
      columns.push_back(pca.eig.vectors.rows().row(i).transpose());
    }
  }
  if (columns.empty()) {
    throw Error(ErrorCode::DegenerateEnvironments,
                "class means coincide across environments for every class");
  }
  Matrix<Scalar> total(d, static_cast<Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    total.col(static_cast<Index>(c)) = columns[c];
  }
  const auto dec = svd(total);
  const auto& s = dec.values.values;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++rank;
  }
  Index d_s = cfg.d_s.value_or(std::min<Index>(rank, d - 1));
  const Index kept = std::min(d_s, rank);

  IsrProjection<Scalar> out;
  out.method = IsrMethod::Multiclass;
  out.spectrum = dec.values;
  out.d_s_used = d_s;
  out.partial = kept < d_s;
  out.spurious_basis = OrthonormalBasis<Scalar>::from_rows(
      dec.left.rows().topRows(kept), Scalar(1e-9));
  out.invariant_basis = null_space(out.spurious_basis.rows());
  return out;
}

/// Regression recovery: PCA of the unconditioned environment means.
template <typename Scalar>
IsrProjection<Scalar> isr_regression(const MomentSource<Scalar>& src,
                                     const IsrConfig& cfg) {
  cfg.validate(src.dim());
  const auto ids = detail::fit_env_ids(src);
  std::vector<Vector<Scalar>> means;
  for (int id : ids) means.push_back(src.env_mean(id));
  return detail::from_mean_rows(detail::stack_rows(means, src.dim()), cfg,
                                IsrMethod::Regression);
}

template <typename Scalar>
IsrProjection<Scalar> isr_fit(IsrMethod method, const MomentSource<Scalar>& src,
                              const IsrConfig& cfg) {
  switch (method) {
    case IsrMethod::Mean: return isr_mean(src, cfg);
    case IsrMethod::Cov: return isr_cov(src, cfg);
    case IsrMethod::CovRobust: return isr_cov_robust(src, cfg);
    case IsrMethod::Multiclass: return isr_multiclass(src, cfg);
    case IsrMethod::Regression: return isr_regression(src, cfg);
  }
  throw Error(ErrorCode::InvalidParameter, "unknown ISR method");
}

template <typename Scalar>
IsrProjection<Scalar> isr_mean(const MultiEnvData<Scalar>& data,
                               const IsrConfig& cfg) {
  return isr_mean(SampleMoments<Scalar>(data), cfg);
}

template <typename Scalar>
IsrProjection<Scalar> isr_cov(const MultiEnvData<Scalar>& data,
                              const IsrConfig& cfg) {
  return isr_cov(SampleMoments<Scalar>(data), cfg);
}

template <typename Scalar>
IsrProjection<Scalar> isr_cov_robust(const MultiEnvData<Scalar>& data,
                                     const IsrConfig& cfg) {
  return isr_cov_robust(SampleMoments<Scalar>(data), cfg);
}

template <typename Scalar>
IsrProjection<Scalar> isr_multiclass(const MultiEnvData<Scalar>& data,
                                     const IsrConfig& cfg) {
  return isr_multiclass(SampleMoments<Scalar>(data), cfg);
}

template <typename Scalar>
IsrProjection<Scalar> isr_regression(const MultiEnvData<Scalar>& data,
                                     const IsrConfig& cfg) {
  return isr_regression(SampleMoments<Scalar>(data), cfg);
}

template <typename Scalar>
IsrProjection<Scalar> isr_fit(IsrMethod method, const MultiEnvData<Scalar>& data,
                              const IsrConfig& cfg) {
  return isr_fit(method, SampleMoments<Scalar>(data), cfg);
}

/// x -> x P'^T, one row per sample.
template <typename Scalar, typename Derived>
Matrix<Scalar> apply_projection(const IsrProjection<Scalar>& proj,
                                const Eigen::MatrixBase<Derived>& x) {
  if (x.cols() != proj.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "apply_projection: input has " + std::to_string(x.cols()) +
                    " columns, projection expects " +
                    std::to_string(proj.dim()));
  }
  return x * proj.invariant_basis.rows().transpose();
}

/// Shrinks the spurious component by alpha: alpha = 1 is the identity and
/// alpha = 0 removes it.
template <typename Scalar, typename Derived>
Matrix<Scalar> subspace_scale(const IsrProjection<Scalar>& proj,
                              const Eigen::MatrixBase<Derived>& x,
                              Scalar alpha) {
  if (!(alpha >= Scalar(0) && alpha <= Scalar(1))) {
    throw Error(ErrorCode::InvalidParameter,
                "subspace_scale: alpha must lie in [0, 1]");
  }
  if (x.cols() != proj.dim()) {
    throw Error(ErrorCode::DimensionMismatch,
                "subspace_scale: input has " + std::to_string(x.cols()) +
                    " columns, projection expects " +
                    std::to_string(proj.dim()));
  }
  if (alpha == Scalar(1)) return x;
  const auto& s = proj.spurious_basis.rows();
  return x - (Scalar(1) - alpha) * ((x * s.transpose()) * s);
}

}  // namespace isr

#endif  // ISR_ISR_HPP_
