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
 * Seeded generators for the synthetic linear benchmarks.
 *
 * Every random draw comes from a generator seeded by
 * `sub_seed(spec.seed, stream, index)`, so environment e always sees the
 * same parameters and samples no matter how many environments are
 * requested. Test environments reuse the training environment parameters
 * with fresh samples whose spurious latents are shuffled within each
 * environment.
 */
#ifndef ISR_BENCHGEN_HPP_
#define ISR_BENCHGEN_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "isr/datamodel.hpp"
#include "isr/predictors.hpp"

namespace isr {

enum class Family { Example2, Example3, Example3Prime, MulticlassLUT, RegressionLUT };

std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view name);
/// Valid family names joined with ", ".
std::string family_names();

struct Example2Params {
  double nu_c = 0.02;
  double nu_e = 1.0;
  double noise = 0.1;  ///< standard deviation of the per-coordinate jitter
  std::vector<double> p = {0.95, 0.97, 0.99};
  std::vector<double> s = {0.3, 0.5, 0.7};
  double p_extra_min = 0.9;
  double p_extra_max = 1.0;
  double s_extra_min = 0.3;
  double s_extra_max = 0.7;
};

struct Example3Params {
  double gamma = 0.1;
  double sigma_c = 0.1;
  double sigma_e = 0.1;      ///< Example3
  double sigma_e_min = 0.1;  ///< Example3Prime
  double sigma_e_max = 0.3;
  double eta = 0.5;
};

struct MulticlassParams {
  int k = 3;
  double nu_inv = 0.1;
  double nu_spu = 1.0;
  double sigma_c = 0.1;
  double sigma_e = 0.1;
};

struct RegressionParams {
  double nu_inv = 1.0;
  double nu_spu = 50.0;
  double sigma_c = 0.1;
  double noise = 0.1;  ///< target noise standard deviation
  int max_redraws = 100;
};

struct GenSpec {
  Family family = Family::Example3;
  Index d_c = 5;
  Index d_s = 5;
  bool scrambled = false;
  Index n_per_env = 10000;
  int E = 2;
  std::uint64_t seed = 0;
  Example2Params ex2;
  Example3Params ex3;
  MulticlassParams mc;
  RegressionParams reg;

  Task task() const;
  /// Throws InvalidSpec.
  void validate() const;
};

/// Latent draws of one environment, one row per sample.
struct EnvLatents {
  Eigen::MatrixXd z_c;
  Eigen::MatrixXd z_e;
  Eigen::VectorXd y;
};

/// Everything needed to evaluate against the ground truth. Fields that do
/// not apply to the family stay empty.
struct Truth {
  Eigen::MatrixXd r;
  Index d_c = 0;
  Index d_s = 0;
  // Binary Gaussian families, latent scale.
  Eigen::VectorXd mu_c;
  double sigma_c = 0.0;
  double eta = 0.5;
  std::vector<Eigen::VectorXd> mu_e;
  std::vector<double> sigma_e;
  // Example2 schedule.
  std::vector<double> p_e;
  std::vector<double> s_e;
  // Multiclass, latent scale.
  Eigen::MatrixXd class_means;                ///< k x d_c
  std::vector<Eigen::MatrixXd> class_env_means;  ///< per env, k x d_s
  // Regression, latent scale.
  Eigen::VectorXd w_c;
  double b_c = 0.0;
  double noise = 0.0;
  std::vector<Eigen::MatrixXd> w_cs;
  std::vector<Eigen::VectorXd> b_e;

  std::vector<EnvLatents> train_latents;
  std::vector<EnvLatents> test_latents;  ///< before shuffling
};

struct BenchInstance {
  GenSpec spec;
  MultiEnvData<double> train;
  MultiEnvData<double> test;  ///< spurious latents shuffled within each env
  Truth truth;
};

enum class SeedStream : std::uint64_t {
  Mixing = 1,
  Global = 2,
  EnvParams = 3,
  TrainSamples = 4,
  TestSamples = 5,
  Shuffle = 6,
};

/// splitmix64-derived seed for (master seed, stream, index).
std::uint64_t sub_seed(std::uint64_t seed, SeedStream stream,
                       std::uint64_t index);

/// Family parameters and per-environment parameters, no samples.
Truth draw_truth(const GenSpec& spec);

BenchInstance gen(const GenSpec& spec);

/// Test environments with the spurious latent rows permuted uniformly at
/// random within each environment, then mixed again by R.
MultiEnvData<double> make_test_envs(const BenchInstance& instance);
/// The latents behind make_test_envs, spurious rows already permuted.
std::vector<EnvLatents> shuffled_test_latents(const BenchInstance& instance);

/// The training environments with the same within-environment shuffle
/// applied (independent permutations), for the empirical oracle.
MultiEnvData<double> make_shuffled_train_envs(const BenchInstance& instance);

/// Rows spanning the observed-space directions that see only z_c.
OrthonormalBasis<double> truth_invariant_basis(const BenchInstance& instance);

/// Exact moments of the instance's family (Unsupported for Example2, whose
/// latents are a sign mixture rather than a Gaussian).
std::unique_ptr<MomentSource<double>> population_moments(const GenSpec& spec);
std::unique_ptr<MomentSource<double>> population_moments(const Truth& truth,
                                                         const GenSpec& spec);

/// Closed-form optimal invariant predictor on observed coordinates.
LinearModel oracle_predictor(const BenchInstance& instance);

}  // namespace isr

#endif  // ISR_BENCHGEN_HPP_
