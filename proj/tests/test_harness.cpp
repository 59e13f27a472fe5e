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
#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "isr/harness.hpp"
#include "test_util.hpp"

namespace {

using isr::Algorithm;
using isr::Family;
using isr::GenSpec;
using isr::Index;
using isr::Metric;
using isr::ResultRecord;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ResultRecord record(const std::string& alg, int e, double v,
                    bool failed = false) {
  ResultRecord r;
  r.family = "Example3_dc5_ds5";
  r.algorithm = alg;
  r.E = e;
  r.metric = "mean_error";
  r.value = v;
  r.failed = failed;
  return r;
}

GenSpec spec_of(Family f, Index n) {
  GenSpec s;
  s.family = f;
  s.n_per_env = n;
  return s;
}

isr::ExperimentGrid small_grid() {
  isr::ExperimentGrid g;
  g.specs = {spec_of(Family::Example3Prime, 500), spec_of(Family::MulticlassLUT, 300),
             spec_of(Family::RegressionLUT, 300)};
  g.specs[0].scrambled = true;
  g.algorithms = {Algorithm::IsrMean, Algorithm::IsrCov, Algorithm::IsrMulticlass,
                  Algorithm::IsrRegression, Algorithm::Erm, Algorithm::Oracle};
  g.e_min = 2;
  g.e_max = 3;
  g.seeds = {0, 1};
  g.metrics = {Metric::MeanError, Metric::WorstGroup, Metric::Rmse};
  return g;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("algorithm and metric names round-trip") {
  for (auto a : {Algorithm::IsrMean, Algorithm::IsrCov, Algorithm::IsrCovRobust,
                 Algorithm::IsrMulticlass, Algorithm::IsrRegression,
                 Algorithm::Erm, Algorithm::Oracle, Algorithm::OracleErm}) {
    CHECK(isr::parse_algorithm(isr::to_string(a)) == a);
  }
  for (auto m : {Metric::MeanError, Metric::Rmse, Metric::R2, Metric::WorstGroup}) {
    CHECK(isr::parse_metric(isr::to_string(m)) == m);
  }
  CHECK_FALSE(isr::parse_algorithm("irm").has_value());
  CHECK_FALSE(isr::parse_metric("accuracy").has_value());
}

TEST_CASE("task support") {
  using isr::Task;
  CHECK(isr::supports(Algorithm::IsrCov, Task::binary()));
  CHECK_FALSE(isr::supports(Algorithm::IsrCov, Task::multiclass(3)));
  CHECK(isr::supports(Algorithm::IsrMulticlass, Task::binary()));
  CHECK_FALSE(isr::supports(Algorithm::IsrRegression, Task::binary()));
  CHECK(isr::supports(Algorithm::Erm, Task::regression()));
  CHECK_FALSE(isr::supports(Metric::Rmse, Task::binary()));
  CHECK(isr::supports(Metric::R2, Task::regression()));
  CHECK(isr::supports(Metric::WorstGroup, Task::regression()));
}

TEST_CASE("family labels") {
  auto s = spec_of(Family::Example3Prime, 0);
  CHECK(isr::family_label(s) == "Example3Prime_dc5_ds5");
  s.family = Family::MulticlassLUT;
  s.mc.k = 4;
  CHECK(isr::family_label(s) == "MulticlassLUT_dc5_ds5_k4");
}

TEST_CASE("aggregate examples") {
  const std::vector<ResultRecord> one = {record("erm", 2, 0.3)};
  const auto a1 = isr::aggregate(one);
  REQUIRE(a1.size() == 1);
  CHECK(a1[0].mean == 0.3);
  CHECK(a1[0].ci_low == 0.3);
  CHECK(a1[0].ci_high == 0.3);

  const std::vector<ResultRecord> two = {record("erm", 2, 0.0),
                                         record("erm", 2, 0.2)};
  const auto a2 = isr::aggregate(two);
  REQUIRE(a2.size() == 1);
  CHECK(a2[0].mean == doctest::Approx(0.1));
  CHECK(a2[0].n == 2);

  const std::vector<ResultRecord> with_failure = {
      record("erm", 2, 0.4), record("erm", 2, NAN, true)};
  const auto a3 = isr::aggregate(with_failure);
  CHECK(a3[0].mean == 0.4);
  CHECK(a3[0].n == 1);
  CHECK(a3[0].n_failed == 1);

  const std::vector<ResultRecord> all_failed = {record("erm", 2, NAN, true)};
  CHECK(std::isnan(isr::aggregate(all_failed)[0].mean));

  CHECK_ISR_ERROR(isr::aggregate(std::vector<ResultRecord>{}),
                  isr::ErrorCode::EmptyInput);
}

TEST_CASE("aggregate agrees with an independent recount") {
  std::vector<ResultRecord> recs;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(0.0, 0.5);
  for (int e = 2; e <= 5; ++e)
    for (const char* alg : {"oracle", "erm", "isr_mean"})
      for (int s = 0; s < 7; ++s) recs.push_back(record(alg, e, unif(rng), s == 3 && e == 4));
  std::map<std::tuple<std::string, int>, std::vector<double>> groups;
  for (const auto& r : recs) {
    if (!r.failed) groups[{r.algorithm, r.E}].push_back(r.value);
  }
  const auto aggs = isr::aggregate(recs);
  CHECK(aggs.size() == groups.size());
  for (const auto& a : aggs) {
    const auto& v = groups.at({a.algorithm, a.E});
    double mean = 0;
    for (double x : v) mean += x;
    mean /= double(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= double(v.size() - 1);
    const double half = 1.96 * std::sqrt(var / double(v.size()));
    CHECK(a.mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(a.ci_high - a.mean == doctest::Approx(half).epsilon(1e-12));
    CHECK(a.mean - a.ci_low == doctest::Approx(half).epsilon(1e-12));
  }
  for (std::size_t i = 1; i < aggs.size(); ++i) {
    const auto& p = aggs[i - 1];
    const auto& q = aggs[i];
    CHECK(std::tie(p.family, p.scrambled, p.algorithm, p.metric, p.E) <
          std::tie(q.family, q.scrambled, q.algorithm, q.metric, q.E));
  }
}

TEST_CASE("run_grid is deterministic and independent of jobs") {
  auto g = small_grid();
  const auto serial = isr::run_grid(g);
  g.jobs = 3;
  const auto parallel = isr::run_grid(g);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    const auto& a = serial[i];
    const auto& b = parallel[i];
    CHECK(a.family == b.family);
    CHECK(a.algorithm == b.algorithm);
    CHECK(a.metric == b.metric);
    CHECK(a.E == b.E);
    CHECK(a.seed == b.seed);
    CHECK(a.failed == b.failed);
    CHECK((a.value == b.value || (std::isnan(a.value) && std::isnan(b.value))));
    CHECK(a.wall_time_s == 0.0);
  }
}

TEST_CASE("run_grid emits rows in spec, E, seed, algorithm, metric order") {
  const auto g = small_grid();
  const auto recs = isr::run_grid(g);
  // Binary: isr_mean, isr_cov, isr_multiclass, erm, oracle with 2 metrics.
  // Multiclass: isr_multiclass, erm, oracle with 2 metrics.
  // Regression: isr_regression, erm, oracle with 3 metrics.
  CHECK(recs.size() == 4 * (5 * 2 + 3 * 2 + 3 * 3));
  CHECK(recs.front().family == "Example3Prime_dc5_ds5");
  CHECK(recs.front().algorithm == "isr_mean");
  CHECK(recs.front().metric == "mean_error");
  CHECK(recs[1].metric == "worst_group");
  CHECK(recs[2].algorithm == "isr_cov");
  CHECK(recs[10].seed == 1);
  CHECK(recs[20].E == 3);
  CHECK(recs.back().family == "RegressionLUT_dc5_ds5");
  CHECK(recs.back().algorithm == "oracle");
  CHECK(recs.back().metric == "rmse");
  std::set<std::string> metrics;
  for (const auto& r : recs) {
    if (r.family.starts_with("Example3")) metrics.insert(r.metric);
    CHECK((r.failed || std::isfinite(r.value)));
  }
  CHECK(metrics == std::set<std::string>{"mean_error", "worst_group"});
}

TEST_CASE("timing fills wall time") {
  auto g = small_grid();
  g.specs.resize(1);
  g.seeds = {0};
  g.e_max = 2;
  g.timing = true;
  for (const auto& r : isr::run_grid(g)) CHECK(r.wall_time_s > 0.0);
}

TEST_CASE("grid validation") {
  auto g = small_grid();
  g.algorithms.clear();
  CHECK_ISR_ERROR(g.validate(), isr::ErrorCode::ConfigError);
  g = small_grid();
  g.e_min = 1;
  CHECK_ISR_ERROR(g.validate(), isr::ErrorCode::ConfigError);
  g = small_grid();
  g.seeds.clear();
  CHECK_ISR_ERROR(g.validate(), isr::ErrorCode::ConfigError);
  g = small_grid();
  g.specs[0].d_c = 0;
  CHECK_ISR_ERROR(g.validate(), isr::ErrorCode::ConfigError);
}

TEST_CASE("failing fits become failed records") {
  auto spec = spec_of(Family::Example3, 200);
  spec.E = 2;
  isr::IsrConfig cfg;
  cfg.d_s = 20;
  const Metric metrics[] = {Metric::MeanError};
  const auto recs = isr::run_cell(spec, Algorithm::IsrMean, 0, metrics, cfg);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].failed);
  CHECK(std::isnan(recs[0].value));
  CHECK(recs[0].reason.find("InvalidParameter") != std::string::npos);
  CHECK(recs[0].reason.find(',') == std::string::npos);
}

TEST_CASE("fit_predictor rejects unsupported combinations") {
  const auto inst = isr::gen(spec_of(Family::MulticlassLUT, 50));
  CHECK_ISR_ERROR(isr::fit_predictor(Algorithm::IsrCov, inst.train, {}, {}),
                  isr::ErrorCode::Unsupported);
  CHECK_ISR_ERROR(isr::fit_predictor(Algorithm::Oracle, inst.train, {}, {}),
                  isr::ErrorCode::InvalidParameter);
}

TEST_CASE("transform_features") {
  auto spec = spec_of(Family::Example3, 300);
  spec.E = 6;
  const auto inst = isr::gen(spec);
  isr::IsrConfig cfg;
  cfg.d_s = 5;
  const auto proj = isr::isr_mean(inst.train, cfg);
  const MatrixXd x = inst.train.stacked_x();
  CHECK(isr::transform_features(proj, x, 0.0) == isr::apply_projection(proj, x));
  CHECK(isr::transform_features(proj, x, 1.0) == x);
}

TEST_CASE("pipeline predictor on raw inputs matches the head") {
  auto spec = spec_of(Family::Example3Prime, 500);
  spec.E = 4;
  spec.scrambled = true;
  const auto inst = isr::gen(spec);
  for (double alpha : {0.0, 0.3}) {
    isr::IsrConfig cfg;
    cfg.d_s = 5;
    cfg.scale_alpha = alpha;
    const auto p = isr::fit_isr_pipeline(isr::IsrMethod::Cov, inst.train, cfg,
                                         isr::harness_fit_config());
    const MatrixXd x = inst.test.stacked_x();
    const MatrixXd via_head =
        p.head.decision(isr::transform_features(p.projection, x, alpha));
    CHECK((p.full.model.decision(x) - via_head).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("worst_group metric skips unlabeled rows") {
  isr::LinearModel m{isr::Task::binary(), MatrixXd::Ones(1, 1), VectorXd::Zero(1)};
  MatrixXd x(2, 1);
  x << 1, -1;
  isr::MultiEnvData<double> data(
      {{isr::kUnlabeledEnv, x, Eigen::Vector2d(0, 1)},
       {0, x, Eigen::Vector2d(1, 0)},
       {1, x, Eigen::Vector2d(1, 1)}},
      1, isr::Task::binary());
  CHECK(isr::evaluate(m, data, Metric::MeanError) == doctest::Approx(0.25));
  CHECK(isr::evaluate(m, data, Metric::WorstGroup) == 0.5);
  const auto groups = isr::group_metrics(m, data);
  CHECK(groups.size() == 4);
  CHECK_ISR_ERROR(isr::evaluate(m, data, Metric::Rmse),
                  isr::ErrorCode::Unsupported);
}

TEST_CASE("ERM trails the oracle on scrambled Example-3 with E = 2") {
  auto spec = spec_of(Family::Example3, 10000);
  spec.E = 2;
  spec.scrambled = true;
  const Metric metrics[] = {Metric::MeanError};
  const auto erm = isr::run_cell(spec, Algorithm::Erm, 0, metrics, {});
  const auto oracle = isr::run_cell(spec, Algorithm::Oracle, 0, metrics, {});
  CHECK(erm[0].value > oracle[0].value);
}

TEST_CASE("ISR-Cov reaches the oracle on Example-3' with E = 2 at large n") {
  auto spec = spec_of(Family::Example3Prime, 100000);
  spec.E = 2;
  spec.scrambled = true;
  const Metric metrics[] = {Metric::MeanError};
  const auto cov = isr::run_cell(spec, Algorithm::IsrCov, 0, metrics, {});
  const auto oracle = isr::run_cell(spec, Algorithm::Oracle, 0, metrics, {});
  CHECK(std::abs(cov[0].value - oracle[0].value) < 0.01);
}

TEST_CASE("oracle dominates every algorithm on aggregate") {
  isr::ExperimentGrid g;
  g.specs = {spec_of(Family::Example2, 5000), spec_of(Family::Example3, 5000),
             spec_of(Family::Example3Prime, 5000)};
  g.algorithms = {Algorithm::IsrMean, Algorithm::IsrCov, Algorithm::IsrCovRobust,
                  Algorithm::Erm, Algorithm::OracleErm, Algorithm::Oracle};
  g.e_min = 2;
  g.e_max = 4;
  g.seeds = {0, 1, 2};
  const auto recs = isr::run_grid(g);
  const auto aggs = isr::aggregate(recs);
  std::map<std::tuple<std::string, int>, double> oracle;
  for (const auto& a : aggs) {
    if (a.algorithm == "oracle") oracle[{a.family, a.E}] = a.mean;
  }
  for (const auto& a : aggs) {
    if (a.n == 0) continue;
    CAPTURE(a.family);
    CAPTURE(a.algorithm);
    CAPTURE(a.E);
    CHECK(oracle.at({a.family, a.E}) <= a.mean + 0.005);
  }
}

}  // TEST_SUITE
