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
 * Environment-complexity sweeps over (benchmark, algorithm, E, seed).
 *
 * For each (spec, E, seed) one instance is generated and shared by every
 * algorithm. Metrics are averaged over the test environments. Failures of a
 * fit are recorded on the result rows instead of aborting the sweep.
 */
#ifndef ISR_HARNESS_HPP_
#define ISR_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isr/benchgen.hpp"
#include "isr/isr.hpp"
#include "isr/predictors.hpp"

namespace isr {

enum class Algorithm {
  IsrMean,
  IsrCov,
  IsrCovRobust,
  IsrMulticlass,
  IsrRegression,
  Erm,
  Oracle,     ///< closed-form optimal invariant predictor
  OracleErm,  ///< ERM on training data with spurious latents shuffled
};

enum class Metric { MeanError, Rmse, R2, WorstGroup };

std::string_view to_string(Algorithm a);
std::optional<Algorithm> parse_algorithm(std::string_view name);
std::string algorithm_names();
std::string_view to_string(Metric m);
std::optional<Metric> parse_metric(std::string_view name);
std::string metric_names();

/// Whether the algorithm can run on the task at all.
bool supports(Algorithm a, const Task& task);
/// Whether the metric is defined for the task (rmse and r2 need regression).
bool supports(Metric m, const Task& task);

/// "<Family>_dc<d_c>_ds<d_s>", plus "_k<k>" for the multiclass family.
std::string family_label(const GenSpec& spec);

/// Solver defaults used by the sweeps.
FitConfig harness_fit_config();

struct ExperimentGrid {
  std::vector<GenSpec> specs;  ///< E and seed are overwritten per cell
  std::vector<Algorithm> algorithms;
  int e_min = 2;
  int e_max = 10;
  std::vector<std::uint64_t> seeds;
  std::vector<Metric> metrics = {Metric::MeanError};
  /// d_s is taken from each spec unless set here.
  IsrConfig isr;
  FitConfig fit = harness_fit_config();
  bool timing = false;
  int jobs = 1;

  void validate() const;
};

struct ResultRecord {
  std::string family;
  bool scrambled = false;
  std::string algorithm;
  int E = 0;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
  double wall_time_s = 0.0;
  bool partial = false;
  bool failed = false;
  std::string reason;

  bool operator==(const ResultRecord&) const = default;
};

/// A fitted predictor plus what the ISR step reported.
struct FittedPredictor {
  LinearModel model;  ///< acts on raw inputs
  bool partial = false;
};

/// ISR step plus ERM head, with the head kept in transformed coordinates.
struct IsrPipeline {
  IsrProjection<double> projection;
  LinearModel head;      ///< acts on transform_features(...)
  FittedPredictor full;  ///< same predictor on raw inputs
};

/// x P^T when alpha is 0, otherwise subspace_scale(proj, x, alpha).
Eigen::MatrixXd transform_features(const IsrProjection<double>& proj,
                                   const Eigen::MatrixXd& x, double alpha);

IsrPipeline fit_isr_pipeline(IsrMethod method, const MultiEnvData<double>& train,
                             const IsrConfig& isr, const FitConfig& fit);

/// Fits `algorithm` on `train` (ISR step, then ERM head on the transformed
/// features). Oracle algorithms need the instance and are rejected here.
FittedPredictor fit_predictor(Algorithm algorithm,
                              const MultiEnvData<double>& train,
                              const IsrConfig& isr, const FitConfig& fit);

/// Metric averaged over the environments of `test` (environment id -1 rows
/// are skipped); worst_group is the largest group error (classification,
/// groups label x env) or the largest environment MSE (regression).
double evaluate(const LinearModel& model, const MultiEnvData<double>& test,
                Metric metric);

/// Per-group values over labeled environments: classification error per
/// (label, env), or MSE per env (label 0) for regression.
std::vector<GroupMetric> group_metrics(const LinearModel& model,
                                       const MultiEnvData<double>& data);

/// Runs one algorithm on an already generated instance.
std::vector<ResultRecord> run_on_instance(const BenchInstance& instance,
                                          Algorithm algorithm,
                                          std::span<const Metric> metrics,
                                          const IsrConfig& isr,
                                          const FitConfig& fit,
                                          bool timing = false);

std::vector<ResultRecord> run_cell(const GenSpec& spec, Algorithm algorithm,
                                   std::uint64_t seed,
                                   std::span<const Metric> metrics,
                                   const IsrConfig& isr,
                                   const FitConfig& fit = harness_fit_config(),
                                   bool timing = false);

/// Deterministic order: spec, E, seed, algorithm, metric. Algorithms a
/// family's task does not support are skipped.
std::vector<ResultRecord> run_grid(const ExperimentGrid& grid);

struct Aggregate {
  std::string family;
  bool scrambled = false;
  std::string algorithm;
  int E = 0;
  std::string metric;
  double mean = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n = 0;  ///< successful records
  int n_failed = 0;
  int n_partial = 0;
};

/// Mean and normal-approximation 95% interval (1.96 sd / sqrt(n), sample sd)
/// per (family, scrambled, algorithm, E, metric), sorted by
/// (family, scrambled, algorithm, metric, E). Failed records are counted,
/// not averaged.
std::vector<Aggregate> aggregate(std::span<const ResultRecord> records);

}  // namespace isr

#endif  // ISR_HARNESS_HPP_
