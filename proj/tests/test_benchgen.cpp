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

#include <cmath>
#include <vector>

#include "isr/benchgen.hpp"
#include "test_util.hpp"

namespace {

using isr::Family;
using isr::GenSpec;
using isr::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

GenSpec make_spec(Family f, int e, Index n, std::uint64_t seed,
                  bool scrambled = false) {
  GenSpec s;
  s.family = f;
  s.E = e;
  s.n_per_env = n;
  s.seed = seed;
  s.scrambled = scrambled;
  return s;
}

double correlation(const VectorXd& a, const VectorXd& b) {
  const VectorXd ac = a.array() - a.mean();
  const VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

bool same_data(const isr::MultiEnvData<double>& a,
               const isr::MultiEnvData<double>& b) {
  if (a.num_envs() != b.num_envs()) return false;
  for (Index e = 0; e < a.num_envs(); ++e) {
    const auto& x = a.envs()[static_cast<std::size_t>(e)];
    const auto& y = b.envs()[static_cast<std::size_t>(e)];
    if (x.env_id != y.env_id || x.x != y.x || x.y != y.y) return false;
  }
  return true;
}

const Family kAllFamilies[] = {Family::Example2, Family::Example3,
                               Family::Example3Prime, Family::MulticlassLUT,
                               Family::RegressionLUT};

}  // namespace

TEST_SUITE("benchgen") {

TEST_CASE("family names round-trip") {
  for (Family f : kAllFamilies) {
    CHECK(isr::parse_family(isr::to_string(f)) == f);
  }
  CHECK_FALSE(isr::parse_family("Example4").has_value());
  CHECK(isr::family_names().find("Example3Prime") != std::string::npos);
}

TEST_CASE("Example2 background schedule") {
  const auto t3 = isr::draw_truth(make_spec(Family::Example2, 3, 0, 0));
  CHECK(t3.p_e == std::vector<double>{0.95, 0.97, 0.99});
  CHECK(t3.s_e == std::vector<double>{0.3, 0.5, 0.7});
  const auto t8 = isr::draw_truth(make_spec(Family::Example2, 8, 0, 1));
  for (std::size_t e = 3; e < 8; ++e) {
    CHECK(t8.p_e[e] >= 0.9);
    CHECK(t8.p_e[e] <= 1.0);
    CHECK(t8.s_e[e] >= 0.3);
    CHECK(t8.s_e[e] <= 0.7);
  }
}

TEST_CASE("Example2 labels follow the invariant sign rule") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = isr::gen(make_spec(Family::Example2, 5, 2000, seed, true));
    for (const auto& lat : inst.truth.train_latents) {
      for (Index i = 0; i < lat.y.size(); ++i) {
        CHECK(lat.y(i) == (lat.z_c.row(i).sum() > 0 ? 1.0 : 0.0));
      }
    }
  }
}

TEST_CASE("empty environments are valid") {
  for (Family f : kAllFamilies) {
    const auto inst = isr::gen(make_spec(f, 3, 0, 0));
    CHECK(inst.train.num_envs() == 3);
    CHECK(inst.train.total_size() == 0);
    CHECK(inst.test.total_size() == 0);
  }
}

TEST_CASE("generation is deterministic") {
  for (Family f : kAllFamilies) {
    const auto a = isr::gen(make_spec(f, 4, 300, 77, true));
    const auto b = isr::gen(make_spec(f, 4, 300, 77, true));
    CHECK(same_data(a.train, b.train));
    CHECK(same_data(a.test, b.test));
    CHECK(a.truth.r == b.truth.r);
    const auto c = isr::gen(make_spec(f, 4, 300, 78, true));
    CHECK_FALSE(same_data(a.train, c.train));
  }
}

TEST_CASE("adding environments leaves existing ones unchanged") {
  for (Family f : kAllFamilies) {
    const auto small = isr::gen(make_spec(f, 3, 200, 5, true));
    const auto large = isr::gen(make_spec(f, 6, 200, 5, true));
    for (std::size_t e = 0; e < 3; ++e) {
      CHECK(small.train.envs()[e].x == large.train.envs()[e].x);
      CHECK(small.test.envs()[e].x == large.test.envs()[e].x);
    }
  }
}

TEST_CASE("instance shapes match the spec") {
  for (Family f : kAllFamilies) {
    auto spec = make_spec(f, 3, 50, 2);
    spec.d_c = 4;
    spec.d_s = 3;
    const auto inst = isr::gen(spec);
    CHECK(inst.train.d() == 7);
    CHECK(inst.test.d() == 7);
    CHECK(inst.train.total_size() == 150);
    CHECK(inst.train.task() == spec.task());
    CHECK(inst.truth.r == MatrixXd::Identity(7, 7));
  }
}

TEST_CASE("scrambled mixing is orthonormal") {
  for (Family f : kAllFamilies) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto t = isr::draw_truth(make_spec(f, 2, 0, seed, true));
      const MatrixXd dev = t.r * t.r.transpose() - MatrixXd::Identity(10, 10);
      CHECK(dev.cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("Example3' sigma_e stays in [0.1, 0.3]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = isr::draw_truth(make_spec(Family::Example3Prime, 10, 0, seed));
    for (double s : t.sigma_e) {
      CHECK(s >= 0.1);
      CHECK(s <= 0.3);
    }
  }
}

TEST_CASE("test shuffle decorrelates labels from spurious latents") {
  const Index n = 10000;
  const auto inst = isr::gen(make_spec(Family::Example3, 3, n, 9, true));
  const auto shuffled = isr::shuffled_test_latents(inst);
  for (std::size_t e = 0; e < shuffled.size(); ++e) {
    const auto& before = inst.truth.test_latents[e];
    const auto& after = shuffled[e];
    CHECK(after.z_c == before.z_c);
    CHECK(after.y == before.y);
    for (Index c = 0; c < after.z_e.cols(); ++c) {
      CHECK(std::abs(correlation(after.y, after.z_e.col(c))) <
            4.0 / std::sqrt(double(n)));
    }
    const MatrixXd x = inst.test.envs()[e].x;
    MatrixXd z(n, 10);
    z << after.z_c, after.z_e;
    CHECK((x - z * inst.truth.r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("regression test environments keep the invariant part") {
  const auto inst = isr::gen(make_spec(Family::RegressionLUT, 2, 500, 4));
  const auto shuffled = isr::shuffled_test_latents(inst);
  for (std::size_t e = 0; e < shuffled.size(); ++e) {
    CHECK(shuffled[e].z_c == inst.truth.test_latents[e].z_c);
    CHECK(inst.test.envs()[e].y == inst.truth.test_latents[e].y);
  }
}

TEST_CASE("empirical class means match analytic means") {
  const Index n = 10000;
  for (Family f : {Family::Example3, Family::Example3Prime,
                   Family::MulticlassLUT, Family::RegressionLUT}) {
    auto spec = make_spec(f, 3, n, 13, true);
    const auto inst = isr::gen(spec);
    const auto pop = isr::population_moments(inst.truth, spec);
    const isr::SampleMoments<double> smp(inst.train);
    double sigma = inst.truth.sigma_c;
    for (double s : inst.truth.sigma_e) sigma = std::max(sigma, s);
    CAPTURE(isr::to_string(f));
    for (int e = 0; e < 3; ++e) {
      if (f == Family::RegressionLUT) {
        // z_e carries W z_c, so its spread scales with the spurious map.
        const auto i = static_cast<std::size_t>(e);
        const double spread =
            inst.truth.sigma_c * (1.0 + inst.truth.w_cs[i].norm());
        CHECK((smp.env_mean(e) - pop->env_mean(e)).cwiseAbs().maxCoeff() <
              4 * spread / std::sqrt(double(n)));
        continue;
      }
      const int k = spec.task().classes;
      for (int y = 0; y < k; ++y) {
        const double n_y = double(isr::rows_with_label(
                                      inst.train.env(e), y).rows());
        CHECK((smp.cond_mean(e, y) - pop->cond_mean(e, y)).cwiseAbs().maxCoeff() <
              4 * sigma / std::sqrt(n_y));
      }
    }
  }
}

TEST_CASE("truth invariant basis") {
  const auto plain = isr::gen(make_spec(Family::Example3, 2, 0, 0));
  const auto basis = isr::truth_invariant_basis(plain);
  CHECK(isr::testing::max_angle(
            basis, isr::OrthonormalBasis<double>::from_rows(
                       MatrixXd::Identity(10, 10).topRows(5))) < 1e-12);
  const auto scrambled = isr::gen(make_spec(Family::Example3, 2, 0, 3, true));
  const auto sb = isr::truth_invariant_basis(scrambled);
  CHECK(sb.dim() == 5);
  // Directions in the basis see no spurious latent.
  CHECK((sb.rows() * scrambled.truth.r.rightCols(5)).cwiseAbs().maxCoeff() <
        1e-10);
}

TEST_CASE("oracle predictor ignores spurious latents") {
  for (Family f : kAllFamilies) {
    const auto inst = isr::gen(make_spec(f, 2, 10, 6, true));
    const auto oracle = isr::oracle_predictor(inst);
    const MatrixXd b = inst.truth.r.rightCols(5);
    CHECK((oracle.weights * b).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("invalid specs") {
  auto s = make_spec(Family::Example3, 2, 10, 0);
  s.d_c = 0;
  CHECK_ISR_ERROR(isr::gen(s), isr::ErrorCode::InvalidSpec);
  s = make_spec(Family::Example2, 2, 10, 0);
  s.ex2.p = {1.5, 0.5, 0.5};
  CHECK_ISR_ERROR(isr::gen(s), isr::ErrorCode::InvalidSpec);
  s = make_spec(Family::Example3, 2, -1, 0);
  CHECK_ISR_ERROR(isr::gen(s), isr::ErrorCode::InvalidSpec);
  s = make_spec(Family::MulticlassLUT, 2, 10, 0);
  s.mc.k = 0;
  CHECK_ISR_ERROR(isr::gen(s), isr::ErrorCode::InvalidSpec);
  s = make_spec(Family::Example3, 2, 10, 0);
  s.ex3.eta = 1.0;
  CHECK_ISR_ERROR(isr::gen(s), isr::ErrorCode::InvalidSpec);
}

TEST_CASE("sub-seeds separate streams and indices") {
  using isr::SeedStream;
  CHECK(isr::sub_seed(1, SeedStream::Mixing, 0) !=
        isr::sub_seed(1, SeedStream::Global, 0));
  CHECK(isr::sub_seed(1, SeedStream::EnvParams, 0) !=
        isr::sub_seed(1, SeedStream::EnvParams, 1));
  CHECK(isr::sub_seed(1, SeedStream::EnvParams, 0) !=
        isr::sub_seed(2, SeedStream::EnvParams, 0));
  CHECK(isr::sub_seed(3, SeedStream::Shuffle, 4) ==
        isr::sub_seed(3, SeedStream::Shuffle, 4));
}

}  // TEST_SUITE
