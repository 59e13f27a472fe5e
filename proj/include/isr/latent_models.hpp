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
 * Linear latent-variable models x = R z with z = (z_c, z_e), and their exact
 * (infinite-sample) moments.
 *
 * Any feature scaling is assumed to be folded into the parameters already:
 * `mu_c`, `sigma_c` etc. describe the latent coordinates as they enter R.
 * Standard deviations, not variances, are stored.
 */
#ifndef ISR_LATENT_MODELS_HPP_
#define ISR_LATENT_MODELS_HPP_

#include <string>
#include <vector>

#include "isr/datamodel.hpp"
#include "isr/error.hpp"
#include "isr/numerics.hpp"

namespace isr {

namespace detail {

template <typename Scalar>
void check_mixing(const Matrix<Scalar>& r, Index d_c, Index d_s) {
  if (r.rows() != d_c + d_s || r.cols() != d_c + d_s) {
    throw Error(ErrorCode::DimensionMismatch,
                "mixing matrix must be (d_c + d_s) square");
  }
}

template <typename Scalar>
Index check_env(int env_id, std::size_t count) {
  if (env_id < 0 || static_cast<std::size_t>(env_id) >= count) {
    throw Error(ErrorCode::InvalidParameter,
                "no environment with id " + std::to_string(env_id));
  }
  return static_cast<Index>(env_id);
}

template <typename Scalar>
Matrix<Scalar> block_cov(const Matrix<Scalar>& r, Index d_c, Scalar sigma_c,
                         Scalar sigma_e) {
  Vector<Scalar> var(r.rows());
  var.head(d_c).setConstant(sigma_c * sigma_c);
  var.tail(r.rows() - d_c).setConstant(sigma_e * sigma_e);
  Matrix<Scalar> cov = r * var.asDiagonal() * r.transpose();
  return (cov + cov.transpose()) / Scalar(2);
}

}  // namespace detail

/// Binary Gaussian model: label 1 has latent mean (mu_c, mu_e[e]), label 0
/// the negation; isotropic noise with sigma_c / sigma_e[e] per block.
/// Environment ids are 0..E-1.
template <typename Scalar>
struct BinaryGaussianModel final : MomentSource<Scalar> {
  Matrix<Scalar> r;
  Vector<Scalar> mu_c;
  Scalar sigma_c = Scalar(0.1);
  Scalar eta = Scalar(0.5);  ///< P(y = 1)
  std::vector<Vector<Scalar>> mu_e;
  std::vector<Scalar> sigma_e;

  Index d_c() const { return mu_c.size(); }
  Index d_s() const { return r.rows() - mu_c.size(); }
  Index num_envs() const { return static_cast<Index>(mu_e.size()); }

  Index dim() const override { return r.rows(); }
  Task task() const override { return Task::binary(); }
  std::vector<int> env_ids() const override {
    std::vector<int> ids(mu_e.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    return ids;
  }

  Vector<Scalar> latent_mean(int env_id, int label) const {
    const Index e = detail::check_env<Scalar>(env_id, mu_e.size());
    if (label != 0 && label != 1) {
      throw Error(ErrorCode::InvalidParameter, "binary label must be 0 or 1");
    }
    Vector<Scalar> z(dim());
    z << mu_c, mu_e[e];
    return label == 1 ? z : Vector<Scalar>(-z);
  }

  Vector<Scalar> cond_mean(int env_id, int label) const override {
    detail::check_mixing(r, d_c(), d_s());
    return r * latent_mean(env_id, label);
  }

  Matrix<Scalar> cond_cov(int env_id, int label) const override {
    detail::check_mixing(r, d_c(), d_s());
    const Index e = detail::check_env<Scalar>(env_id, sigma_e.size());
    if (label != 0 && label != 1) {
      throw Error(ErrorCode::InvalidParameter, "binary label must be 0 or 1");
    }
    return detail::block_cov(r, d_c(), sigma_c, sigma_e[e]);
  }

  Vector<Scalar> env_mean(int env_id) const override {
    return eta * cond_mean(env_id, 1) + (Scalar(1) - eta) * cond_mean(env_id, 0);
  }
};

/// k-class Gaussian model with uniform class prior: class y has latent mean
/// (class_means.row(y), env_means[e].row(y)).
template <typename Scalar>
struct MulticlassGaussianModel final : MomentSource<Scalar> {
  Matrix<Scalar> r;
  Matrix<Scalar> class_means;             ///< k x d_c
  std::vector<Matrix<Scalar>> env_means;  ///< per env, k x d_s
  Scalar sigma_c = Scalar(0.1);
  Scalar sigma_e = Scalar(0.1);

  int k() const { return static_cast<int>(class_means.rows()); }
  Index d_c() const { return class_means.cols(); }
  Index d_s() const { return r.rows() - class_means.cols(); }
  Index num_envs() const { return static_cast<Index>(env_means.size()); }

  Index dim() const override { return r.rows(); }
  Task task() const override { return Task::multiclass(k()); }
  std::vector<int> env_ids() const override {
    std::vector<int> ids(env_means.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    return ids;
  }

  Vector<Scalar> latent_mean(int env_id, int label) const {
    const Index e = detail::check_env<Scalar>(env_id, env_means.size());
    if (label < 0 || label >= k()) {
      throw Error(ErrorCode::InvalidParameter, "label outside [0, k)");
    }
    Vector<Scalar> z(dim());
    z << class_means.row(label).transpose(),
        env_means[e].row(label).transpose();
    return z;
  }

  Vector<Scalar> cond_mean(int env_id, int label) const override {
    detail::check_mixing(r, d_c(), d_s());
    return r * latent_mean(env_id, label);
  }

  Matrix<Scalar> cond_cov(int env_id, int label) const override {
    detail::check_mixing(r, d_c(), d_s());
    latent_mean(env_id, label);
    return detail::block_cov(r, d_c(), sigma_c, sigma_e);
  }

  Vector<Scalar> env_mean(int env_id) const override {
    Vector<Scalar> acc = Vector<Scalar>::Zero(dim());
    for (int y = 0; y < k(); ++y) acc += cond_mean(env_id, y);
    return acc / static_cast<Scalar>(k());
  }
};

/// Linear regression model: z_c ~ N(mu_c, sigma_c^2 I),
/// y = w_c^T z_c + b_c + N(0, noise^2), z_e = W[e] z_c + b[e].
template <typename Scalar>
struct LinearRegressionModel final : MomentSource<Scalar> {
  Matrix<Scalar> r;
  Vector<Scalar> mu_c;
  Scalar sigma_c = Scalar(0.1);
  Vector<Scalar> w_c;
  Scalar b_c = Scalar(0);
  Scalar noise = Scalar(0);
  std::vector<Matrix<Scalar>> w_cs;  ///< per env, d_s x d_c
  std::vector<Vector<Scalar>> b_e;   ///< per env, d_s

  Index d_c() const { return mu_c.size(); }
  Index d_s() const { return r.rows() - mu_c.size(); }
  Index num_envs() const { return static_cast<Index>(w_cs.size()); }

  Index dim() const override { return r.rows(); }
  Task task() const override { return Task::regression(); }
  std::vector<int> env_ids() const override {
    std::vector<int> ids(w_cs.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    return ids;
  }

  Vector<Scalar> latent_env_mean(int env_id) const {
    const Index e = detail::check_env<Scalar>(env_id, w_cs.size());
    Vector<Scalar> z(dim());
    z << mu_c, w_cs[e] * mu_c + b_e[e];
    return z;
  }

  Vector<Scalar> cond_mean(int, int) const override {
    throw Error(ErrorCode::Unsupported,
                "regression model has no class-conditional moments");
  }

  Matrix<Scalar> cond_cov(int, int) const override {
    throw Error(ErrorCode::Unsupported,
                "regression model has no class-conditional moments");
  }

  Vector<Scalar> env_mean(int env_id) const override {
    detail::check_mixing(r, d_c(), d_s());
    return r * latent_env_mean(env_id);
  }
};

/// Rows spanning {v : v^T B = 0} where B holds the last d_s columns of R,
/// i.e. the directions whose projection x -> v^T x sees only z_c.
template <typename Scalar>
OrthonormalBasis<Scalar> invariant_axes(const Matrix<Scalar>& r, Index d_c) {
  const Index d_s = r.cols() - d_c;
  if (d_s == 0) return OrthonormalBasis<Scalar>::identity(r.rows());
  return null_space(Matrix<Scalar>(r.rightCols(d_s).transpose()));
}

/// Rows spanning the column space of B.
template <typename Scalar>
OrthonormalBasis<Scalar> spurious_axes(const Matrix<Scalar>& r, Index d_c) {
  return null_space(invariant_axes(r, d_c).rows());
}

}  // namespace isr

#endif  // ISR_LATENT_MODELS_HPP_
