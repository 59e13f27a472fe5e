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


// Randomized population-mode instances shared by the unit tests and the
// acceptance binary.
#ifndef ISR_TESTS_FIXTURES_HPP_
#define ISR_TESTS_FIXTURES_HPP_

#include <Eigen/Dense>

#include <random>
#include <vector>

#include "isr/latent_models.hpp"
#include "isr/numerics.hpp"

namespace isr::testing {

inline Eigen::VectorXd gaussian_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Eigen::MatrixXd uniform_matrix(Index m, Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = unif(rng);
  return a;
}

/// Binary Gaussian model with random mixing, Gaussian spurious means and,
/// when `distinct_sigma`, per-environment sigma_e drawn from [0.1, 0.3].
inline BinaryGaussianModel<double> random_binary_model(
    Index d_c, Index d_s, int e, std::mt19937_64& rng,
    bool distinct_sigma = false) {
  BinaryGaussianModel<double> m;
  m.r = random_orthonormal<double>(d_c + d_s, rng).rows();
  m.mu_c = gaussian_vector(d_c, rng);
  m.sigma_c = 0.1;
  std::uniform_real_distribution<double> sig(0.1, 0.3);
  for (int i = 0; i < e; ++i) {
    m.mu_e.push_back(gaussian_vector(d_s, rng));
    m.sigma_e.push_back(distinct_sigma ? sig(rng) : 0.1);
  }
  return m;
}

inline MulticlassGaussianModel<double> random_multiclass_model(
    Index d_c, Index d_s, int k, int e, std::mt19937_64& rng) {
  MulticlassGaussianModel<double> m;
  m.r = random_orthonormal<double>(d_c + d_s, rng).rows();
  m.class_means = 0.1 * uniform_matrix(k, d_c, rng);
  for (int i = 0; i < e; ++i) m.env_means.push_back(uniform_matrix(k, d_s, rng));
  m.sigma_c = 0.01;
  m.sigma_e = 0.1;
  return m;
}

inline LinearRegressionModel<double> random_regression_model(
    Index d_c, Index d_s, int e, std::mt19937_64& rng) {
  LinearRegressionModel<double> m;
  m.r = random_orthonormal<double>(d_c + d_s, rng).rows();
  m.mu_c = Eigen::VectorXd::Ones(d_c);
  m.sigma_c = 0.1;
  m.w_c = gaussian_vector(d_c, rng);
  m.b_c = gaussian_vector(1, rng)(0);
  m.noise = 0.1;
  for (int i = 0; i < e; ++i) {
    Eigen::MatrixXd w(d_s, d_c);
    for (Index c = 0; c < d_c; ++c) w.col(c) = gaussian_vector(d_s, rng);
    m.w_cs.push_back(w);
    m.b_e.push_back(gaussian_vector(d_s, rng));
  }
  return m;
}

}  // namespace isr::testing

#endif  // ISR_TESTS_FIXTURES_HPP_
