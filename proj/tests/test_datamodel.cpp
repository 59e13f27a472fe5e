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


#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "isr/benchgen.hpp"
#include "isr/datamodel.hpp"
#include "isr/latent_models.hpp"
#include "test_util.hpp"

namespace {

using isr::EnvDataset;
using isr::Index;
using isr::MultiEnvData;
using isr::Task;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MultiEnvData<double> one_env(const MatrixXd& x, const VectorXd& y,
                             Task task = Task::binary()) {
  return MultiEnvData<double>({EnvDataset<double>{0, x, y}}, x.cols(), task);
}

MultiEnvData<double> gaussian_env(Index n, const VectorXd& mu, double sigma,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(n, mu.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < mu.size(); ++j) x(i, j) = mu(j) + sigma * normal(rng);
  return one_env(x, VectorXd::Ones(n));
}

}  // namespace

TEST_SUITE("datamodel") {

TEST_CASE("cond_mean examples") {
  MatrixXd x(1, 2);
  x << 3, 4;
  auto data = one_env(x, VectorXd::Ones(1));
  CHECK(isr::cond_mean(data, 0, 1) == Eigen::Vector2d(3, 4));

  MatrixXd x2(3, 2);
  x2 << 1, 0, 3, 0, 9, 9;
  VectorXd y2(3);
  y2 << 1, 1, 0;
  auto data2 = one_env(x2, y2);
  CHECK(isr::cond_mean(data2, 0, 1) == Eigen::Vector2d(2, 0));
  CHECK(isr::cond_mean(data2, 0, 0) == Eigen::Vector2d(9, 9));
}

TEST_CASE("cond_mean concentrates at the standard-error rate") {
  const Index n = 100000;
  const double sigma = 0.1;
  auto data = gaussian_env(n, Eigen::Vector2d(1, 1), sigma, 7);
  const VectorXd m = isr::cond_mean(data, 0, 1);
  CHECK((m.array() - 1.0).abs().maxCoeff() < 3 * sigma / std::sqrt(double(n)));
  const VectorXd u = isr::env_mean(data, 0);
  CHECK((u.array() - 1.0).abs().maxCoeff() < 3 * sigma / std::sqrt(double(n)));
}

TEST_CASE("cond_mean without a matching sample") {
  auto data = one_env(MatrixXd::Zero(2, 2), VectorXd::Ones(2));
  CHECK_ISR_ERROR(isr::cond_mean(data, 0, 0), isr::ErrorCode::EmptyClass);
  CHECK_ISR_ERROR(isr::cond_mean(data, 3, 1), isr::ErrorCode::InvalidParameter);
}

TEST_CASE("cond_cov examples") {
  MatrixXd x(2, 2);
  x << 0, 0, 2, 0;
  auto data = one_env(x, VectorXd::Ones(2));
  MatrixXd expected(2, 2);
  expected << 1, 0, 0, 0;
  CHECK(isr::cond_cov(data, 0, 1) == expected);

  MatrixXd same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  CHECK(isr::cond_cov(one_env(same, VectorXd::Ones(3)), 0, 1).isZero());

  CHECK_ISR_ERROR(isr::cond_cov(one_env(x, Eigen::Vector2d(1, 0)), 0, 1),
                  isr::ErrorCode::InsufficientSamples);
}

TEST_CASE("cond_cov is symmetric") {
  std::mt19937_64 rng(3);
  const MatrixXd x = isr::testing::random_matrix(50, 6, rng);
  const MatrixXd c = isr::cond_cov(one_env(x, VectorXd::Ones(50)), 0, 1);
  CHECK(c == c.transpose());
}

TEST_CASE("population covariance with sigma_c 0.1 and sigma_e 0.3") {
  isr::BinaryGaussianModel<double> m;
  m.r = MatrixXd::Identity(2, 2);
  m.mu_c = VectorXd::Ones(1);
  m.sigma_c = 0.1;
  m.mu_e = {VectorXd::Zero(1)};
  m.sigma_e = {0.3};
  const MatrixXd c = m.cond_cov(0, 1);
  CHECK(c(0, 0) == doctest::Approx(0.01));
  CHECK(c(1, 1) == doctest::Approx(0.09));
  CHECK(c(0, 1) == 0.0);
  CHECK(m.cond_cov(0, 0) == c);
}

TEST_CASE("env_mean examples") {
  MatrixXd x(1, 2);
  x << 3, 4;
  CHECK(isr::env_mean(one_env(x, VectorXd::Zero(1)), 0) == Eigen::Vector2d(3, 4));
  MatrixXd x2(2, 2);
  x2 << 1, 0, 3, 0;
  CHECK(isr::env_mean(one_env(x2, Eigen::Vector2d(0, 1)), 0) ==
        Eigen::Vector2d(2, 0));
  auto empty = one_env(MatrixXd(0, 2), VectorXd(0));
  CHECK_ISR_ERROR(isr::env_mean(empty, 0), isr::ErrorCode::EmptyClass);
}

TEST_CASE("estimators are invariant to sample order") {
  std::mt19937_64 rng(19);
  const Index n = 40;
  const MatrixXd x = isr::testing::random_matrix(n, 4, rng);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) y(i) = double(i % 2);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixXd xp(n, 4);
  VectorXd yp(n);
  for (Index i = 0; i < n; ++i) {
    xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    yp(i) = y(perm[static_cast<std::size_t>(i)]);
  }
  const auto a = one_env(x, y);
  const auto b = one_env(xp, yp);
  for (int label : {0, 1}) {
    CHECK((isr::cond_mean(a, 0, label) - isr::cond_mean(b, 0, label)).norm() < 1e-12);
    CHECK((isr::cond_cov(a, 0, label) - isr::cond_cov(b, 0, label)).norm() < 1e-12);
  }
  CHECK((isr::env_mean(a, 0) - isr::env_mean(b, 0)).norm() < 1e-12);
}

TEST_CASE("sample moments converge to population moments") {
  isr::GenSpec spec;
  spec.family = isr::Family::Example3Prime;
  spec.d_c = 3;
  spec.d_s = 3;
  spec.E = 2;
  spec.scrambled = true;
  spec.seed = 5;
  double previous = INFINITY;
  double sigma_max = 0.0;
  double last = 0.0;
  for (Index n : {1000, 10000, 100000}) {
    spec.n_per_env = n;
    const auto inst = isr::gen(spec);
    const auto pop = isr::population_moments(inst.truth, spec);
    const isr::SampleMoments<double> smp(inst.train);
    double dev = 0.0;
    for (int e : {0, 1}) {
      dev = std::max(dev, (smp.cond_mean(e, 1) - pop->cond_mean(e, 1))
                              .cwiseAbs().maxCoeff());
      dev = std::max(dev, (smp.cond_cov(e, 1) - pop->cond_cov(e, 1))
                              .cwiseAbs().maxCoeff());
    }
    CHECK(dev < previous);
    previous = dev;
    last = dev;
    sigma_max = std::max({inst.truth.sigma_c, inst.truth.sigma_e[0],
                          inst.truth.sigma_e[1]});
  }
  CHECK(last < 5 * sigma_max / std::sqrt(1e5));
}

TEST_CASE("population moments of an Example-3 spec") {
  isr::GenSpec spec;
  spec.family = isr::Family::Example3;
  spec.scrambled = true;
  spec.E = 3;
  spec.seed = 2;
  const auto t = isr::draw_truth(spec);
  const auto pop = isr::population_moments(t, spec);
  for (int e = 0; e < 3; ++e) {
    VectorXd z(10);
    z << VectorXd::Constant(5, 0.1), t.mu_e[static_cast<std::size_t>(e)];
    CHECK((pop->cond_mean(e, 1) - t.r * z).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((pop->cond_mean(e, 0) + t.r * z).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(pop->cond_cov(e, 0) == pop->cond_cov(e, 1));
  }
}

TEST_CASE("population moments of a regression spec") {
  isr::GenSpec spec;
  spec.family = isr::Family::RegressionLUT;
  spec.d_c = 3;
  spec.d_s = 2;
  spec.E = 3;
  spec.scrambled = true;
  const auto t = isr::draw_truth(spec);
  const auto pop = isr::population_moments(t, spec);
  const MatrixXd a = t.r.leftCols(3);
  const MatrixXd b = t.r.rightCols(2);
  for (int e = 0; e < 3; ++e) {
    const auto i = static_cast<std::size_t>(e);
    const VectorXd expected = a * t.mu_c + b * (t.w_cs[i] * t.mu_c + t.b_e[i]);
    CHECK((pop->env_mean(e) - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_ISR_ERROR(pop->cond_mean(0, 0), isr::ErrorCode::Unsupported);
}

TEST_CASE("population moments are unavailable for Example2") {
  isr::GenSpec spec;
  spec.family = isr::Family::Example2;
  CHECK_ISR_ERROR(isr::population_moments(spec), isr::ErrorCode::Unsupported);
}

TEST_CASE("MultiEnvData validation") {
  const MatrixXd x = MatrixXd::Zero(2, 3);
  CHECK_ISR_ERROR(MultiEnvData<double>({}, 3, Task::binary()),
                  isr::ErrorCode::EmptyInput);
  CHECK_ISR_ERROR(MultiEnvData<double>({{0, x, VectorXd::Zero(2)},
                                        {0, x, VectorXd::Zero(2)}},
                                       3, Task::binary()),
                  isr::ErrorCode::InvalidParameter);
  CHECK_ISR_ERROR(MultiEnvData<double>({{0, x, VectorXd::Zero(2)}}, 2,
                                       Task::binary()),
                  isr::ErrorCode::DimensionMismatch);
  CHECK_ISR_ERROR(MultiEnvData<double>({{0, x, VectorXd::Zero(3)}}, 3,
                                       Task::binary()),
                  isr::ErrorCode::DimensionMismatch);
  CHECK_ISR_ERROR(MultiEnvData<double>({{0, x, VectorXd::Constant(2, 2.0)}},
                                       3, Task::binary()),
                  isr::ErrorCode::InvalidParameter);
  CHECK_ISR_ERROR(MultiEnvData<double>({{0, x, VectorXd::Constant(2, 0.5)}},
                                       3, Task::multiclass(3)),
                  isr::ErrorCode::InvalidParameter);
  MatrixXd bad = x;
  bad(0, 0) = NAN;
  CHECK_ISR_ERROR(MultiEnvData<double>({{0, bad, VectorXd::Zero(2)}}, 3,
                                       Task::binary()),
                  isr::ErrorCode::InvalidMatrix);
  CHECK_NOTHROW(MultiEnvData<double>({{0, x, VectorXd::Constant(2, 7.5)}}, 3,
                                     Task::regression()));
}

TEST_CASE("unlabeled rows are excluded from moment estimation") {
  const MatrixXd x = MatrixXd::Ones(2, 2);
  MultiEnvData<double> data({{isr::kUnlabeledEnv, 5 * x, VectorXd::Ones(2)},
                             {0, x, VectorXd::Ones(2)},
                             {1, 2 * x, VectorXd::Ones(2)}},
                            2, Task::binary());
  const isr::SampleMoments<double> smp(data);
  CHECK(smp.env_ids() == std::vector<int>{0, 1});
  CHECK(data.total_size() == 6);
  CHECK(data.stacked_x().rows() == 6);
  CHECK(data.stacked_x()(0, 0) == 5.0);
}

}  // TEST_SUITE
