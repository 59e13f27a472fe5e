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

#include "isr/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <thread>
#include <tuple>
#include <utility>

#include "isr/error.hpp"

namespace isr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 8> kAlgorithms = {{
    {Algorithm::IsrMean, "isr_mean"},
    {Algorithm::IsrCov, "isr_cov"},
    {Algorithm::IsrCovRobust, "isr_cov_robust"},
    {Algorithm::IsrMulticlass, "isr_multiclass"},
    {Algorithm::IsrRegression, "isr_regression"},
    {Algorithm::Erm, "erm"},
    {Algorithm::Oracle, "oracle"},
    {Algorithm::OracleErm, "oracle_erm"},
}};

constexpr std::array<std::pair<Metric, std::string_view>, 4> kMetrics = {{
    {Metric::MeanError, "mean_error"},
    {Metric::Rmse, "rmse"},
    {Metric::R2, "r2"},
    {Metric::WorstGroup, "worst_group"},
}};

template <typename Table>
std::string joined_names(const Table& table) {
  std::string out;
  for (const auto& [value, name] : table) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

std::optional<IsrMethod> isr_method(Algorithm a) {
  switch (a) {
    case Algorithm::IsrMean: return IsrMethod::Mean;
    case Algorithm::IsrCov: return IsrMethod::Cov;
    case Algorithm::IsrCovRobust: return IsrMethod::CovRobust;
    case Algorithm::IsrMulticlass: return IsrMethod::Multiclass;
    case Algorithm::IsrRegression: return IsrMethod::Regression;
    default: return std::nullopt;
  }
}

// Result rows are written as unquoted CSV, so reasons stay on one field.
std::string sanitize_reason(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '"') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

void config_error(const std::string& what) {
  throw Error(ErrorCode::ConfigError, what);
}

}  // namespace

std::string_view to_string(Algorithm a) {
  for (const auto& [v, name] : kAlgorithms) {
    if (v == a) return name;
  }
  return "unknown";
}

std::optional<Algorithm> parse_algorithm(std::string_view name) {
  for (const auto& [v, n] : kAlgorithms) {
    if (n == name) return v;
  }
  return std::nullopt;
}

std::string algorithm_names() { return joined_names(kAlgorithms); }

std::string_view to_string(Metric m) {
  for (const auto& [v, name] : kMetrics) {
    if (v == m) return name;
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (const auto& [v, n] : kMetrics) {
    if (n == name) return v;
  }
  return std::nullopt;
}

std::string metric_names() { return joined_names(kMetrics); }

bool supports(Algorithm a, const Task& task) {
  switch (a) {
    case Algorithm::IsrMean:
    case Algorithm::IsrCov:
    case Algorithm::IsrCovRobust:
      return task.kind == TaskKind::Binary;
    case Algorithm::IsrMulticlass:
      return task.is_classification();
    case Algorithm::IsrRegression:
      return task.kind == TaskKind::Regression;
    default:
      return true;
  }
}

bool supports(Metric m, const Task& task) {
  switch (m) {
    case Metric::Rmse:
    case Metric::R2:
      return task.kind == TaskKind::Regression;
    default:
      return true;
  }
}

std::string family_label(const GenSpec& spec) {
  std::string out(to_string(spec.family));
  out += "_dc" + std::to_string(spec.d_c) + "_ds" + std::to_string(spec.d_s);
  if (spec.family == Family::MulticlassLUT) {
    out += "_k" + std::to_string(spec.mc.k);
  }
  return out;
}

FitConfig harness_fit_config() {
  FitConfig cfg;
  cfg.solver = Solver::Newton;
  cfg.max_iters = 100;
  return cfg;
}

void ExperimentGrid::validate() const {
  if (specs.empty()) config_error("no benchmark families given");
  if (algorithms.empty()) {
    config_error("no algorithms given; valid: " + algorithm_names());
  }
  if (seeds.empty()) config_error("no seeds given");
  if (metrics.empty()) config_error("no metrics given; valid: " + metric_names());
  if (e_min < 2 || e_max < e_min) {
    config_error("E range must satisfy 2 <= min <= max");
  }
  if (jobs < 1) config_error("jobs must be >= 1");
  for (const auto& spec : specs) {
    GenSpec probe = spec;
    probe.E = e_max;
    try {
      probe.validate();
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
}

FittedPredictor fit_predictor(Algorithm algorithm,
                              const MultiEnvData<double>& train,
                              const IsrConfig& isr, const FitConfig& fit) {
  const Task task = train.task();
  if (!supports(algorithm, task)) {
    throw Error(ErrorCode::Unsupported,
                std::string(to_string(algorithm)) + " does not support this task");
  }
  if (algorithm == Algorithm::Erm) {
    return {fit_erm(train.stacked_x(), train.stacked_y(), task, fit), false};
  }

  const auto method = isr_method(algorithm);
  if (!method) {
    throw Error(ErrorCode::InvalidParameter,
                std::string(to_string(algorithm)) +
                    " needs the generating instance");
  }
  return fit_isr_pipeline(*method, train, isr, fit).full;
}

MatrixXd transform_features(const IsrProjection<double>& proj,
                            const MatrixXd& x, double alpha) {
  return alpha == 0.0 ? apply_projection(proj, x)
                      : subspace_scale(proj, x, alpha);
}

IsrPipeline fit_isr_pipeline(IsrMethod method, const MultiEnvData<double>& train,
                             const IsrConfig& isr, const FitConfig& fit) {
  const Task task = train.task();
  const MatrixXd x = train.stacked_x();
  const VectorXd y = train.stacked_y();
  IsrPipeline out{isr_fit(method, train, isr), {}, {}};
  const auto& proj = out.projection;
  out.head = fit_erm(transform_features(proj, x, isr.scale_alpha), y, task, fit);
  out.full.partial = proj.partial;
  if (isr.scale_alpha == 0.0) {
    out.full.model = out.head.compose(proj.invariant_basis);
  } else {
    const auto& s = proj.spurious_basis.rows();
    const MatrixXd shrink = MatrixXd::Identity(x.cols(), x.cols()) -
                            (1.0 - isr.scale_alpha) * s.transpose() * s;
    out.full.model = LinearModel{task, out.head.weights * shrink, out.head.bias};
  }
  return out;
}

std::vector<GroupMetric> group_metrics(const LinearModel& model,
                                       const MultiEnvData<double>& data) {
  const Task task = data.task();
  std::vector<GroupMetric> groups;
  for (const auto& env : data.envs()) {
    if (env.env_id == kUnlabeledEnv || env.size() == 0) continue;
    if (task.kind == TaskKind::Regression) {
      groups.push_back({{0, env.env_id}, mse(model, env.x, env.y), env.size()});
      continue;
    }
    const VectorXd pred = model.predict(env.x);
    const auto classes = static_cast<std::size_t>(task.classes);
    std::vector<Index> total(classes, 0);
    std::vector<Index> wrong(classes, 0);
    for (Index i = 0; i < env.size(); ++i) {
      const int label = task.kind == TaskKind::Binary
                            ? (env.y(i) > 0 ? 1 : 0)
                            : static_cast<int>(std::lround(env.y(i)));
      ++total[static_cast<std::size_t>(label)];
      if (static_cast<int>(std::lround(pred(i))) != label) {
        ++wrong[static_cast<std::size_t>(label)];
      }
    }
    for (std::size_t c = 0; c < classes; ++c) {
      const double err = total[c] > 0 ? static_cast<double>(wrong[c]) /
                                            static_cast<double>(total[c])
                                      : 0.0;
      groups.push_back({{static_cast<int>(c), env.env_id}, err, total[c]});
    }
  }
  return groups;
}

double evaluate(const LinearModel& model, const MultiEnvData<double>& test,
                Metric metric) {
  const Task task = test.task();
  if (!supports(metric, task)) {
    throw Error(ErrorCode::Unsupported,
                std::string(to_string(metric)) + " needs a regression task");
  }
  double sum = 0.0;
  int count = 0;
  for (const auto& env : test.envs()) {
    if (env.env_id == kUnlabeledEnv || env.size() == 0) continue;
    if (metric == Metric::WorstGroup) continue;
    switch (metric) {
      case Metric::MeanError:
        sum += task.kind == TaskKind::Regression
                   ? mse(model, env.x, env.y)
                   : classification_error(model, env.x, env.y);
        break;
      case Metric::Rmse:
        sum += rmse(model, env.x, env.y);
        break;
      case Metric::R2:
        sum += r_squared(model, env.x, env.y);
        break;
      case Metric::WorstGroup:
        break;
    }
    ++count;
  }
  if (metric == Metric::WorstGroup) {
    return worst_group(group_metrics(model, test), Worst::Highest).first;
  }
  if (count == 0) {
    throw Error(ErrorCode::EmptyInput, "no nonempty test environment");
  }
  return sum / count;
}

std::vector<ResultRecord> run_on_instance(const BenchInstance& instance,
                                          Algorithm algorithm,
                                          std::span<const Metric> metrics,
                                          const IsrConfig& isr,
                                          const FitConfig& fit, bool timing) {
  const GenSpec& spec = instance.spec;
  const Task task = spec.task();
  ResultRecord base;
  base.family = family_label(spec);
  base.scrambled = spec.scrambled;
  base.algorithm = std::string(to_string(algorithm));
  base.E = spec.E;
  base.seed = spec.seed;

  std::vector<ResultRecord> out;
  const auto start = std::chrono::steady_clock::now();
  try {
    FittedPredictor fitted;
    if (algorithm == Algorithm::Oracle) {
      fitted.model = oracle_predictor(instance);
    } else if (algorithm == Algorithm::OracleErm) {
      const auto shuffled = make_shuffled_train_envs(instance);
      fitted.model = fit_erm(shuffled.stacked_x(), shuffled.stacked_y(), task, fit);
    } else {
      IsrConfig cfg = isr;
      if (!cfg.d_s) cfg.d_s = spec.d_s;
      fitted = fit_predictor(algorithm, instance.train, cfg, fit);
    }
    std::vector<std::pair<Metric, double>> values;
    for (Metric m : metrics) {
      if (!supports(m, task)) continue;
      values.emplace_back(m, evaluate(fitted.model, instance.test, m));
    }
    const double elapsed =
        timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                               start)
                     .count()
               : 0.0;
    for (const auto& [m, v] : values) {
      ResultRecord r = base;
      r.metric = std::string(to_string(m));
      r.value = v;
      r.wall_time_s = elapsed;
      r.partial = fitted.partial;
      out.push_back(std::move(r));
    }
  } catch (const std::exception& e) {
    out.clear();
    for (Metric m : metrics) {
      if (!supports(m, task)) continue;
      ResultRecord r = base;
      r.metric = std::string(to_string(m));
      r.value = std::numeric_limits<double>::quiet_NaN();
      r.failed = true;
      r.reason = sanitize_reason(e.what());
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ResultRecord> run_cell(const GenSpec& spec, Algorithm algorithm,
                                   std::uint64_t seed,
                                   std::span<const Metric> metrics,
                                   const IsrConfig& isr, const FitConfig& fit,
                                   bool timing) {
  GenSpec s = spec;
  s.seed = seed;
  return run_on_instance(gen(s), algorithm, metrics, isr, fit, timing);
}

std::vector<ResultRecord> run_grid(const ExperimentGrid& grid) {
  grid.validate();
  struct Job {
    GenSpec spec;
  };
  std::vector<Job> jobs;
  for (const auto& tmpl : grid.specs) {
    for (int e = grid.e_min; e <= grid.e_max; ++e) {
      for (auto seed : grid.seeds) {
        GenSpec s = tmpl;
        s.E = e;
        s.seed = seed;
        jobs.push_back({s});
      }
    }
  }
  std::vector<std::vector<ResultRecord>> results(jobs.size());
  auto work = [&](std::size_t i) {
    const GenSpec& spec = jobs[i].spec;
    std::vector<ResultRecord>& out = results[i];
    std::optional<BenchInstance> instance;
    std::string gen_error;
    try {
      instance = gen(spec);
    } catch (const std::exception& e) {
      gen_error = sanitize_reason(e.what());
    }
    for (Algorithm a : grid.algorithms) {
      if (!supports(a, spec.task())) continue;
      if (instance) {
        auto recs = run_on_instance(*instance, a, grid.metrics, grid.isr,
                                    grid.fit, grid.timing);
        out.insert(out.end(), recs.begin(), recs.end());
        continue;
      }
      for (Metric m : grid.metrics) {
        if (!supports(m, spec.task())) continue;
        ResultRecord r;
        r.family = family_label(spec);
        r.scrambled = spec.scrambled;
        r.algorithm = std::string(to_string(a));
        r.E = spec.E;
        r.seed = spec.seed;
        r.metric = std::string(to_string(m));
        r.value = std::numeric_limits<double>::quiet_NaN();
        r.failed = true;
        r.reason = gen_error;
        out.push_back(std::move(r));
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(grid.jobs), jobs.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<ResultRecord> flat;
  for (auto& r : results) {
    flat.insert(flat.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  }
  return flat;
}

std::vector<Aggregate> aggregate(std::span<const ResultRecord> records) {
  if (records.empty()) {
    throw Error(ErrorCode::EmptyInput, "aggregate: no records");
  }
  using Key = std::tuple<std::string, bool, std::string, std::string, int>;
  struct Acc {
    std::vector<double> values;
    int failed = 0;
    int partial = 0;
  };
  std::map<Key, Acc> groups;
  for (const auto& r : records) {
    Acc& acc = groups[Key{r.family, r.scrambled, r.algorithm, r.metric, r.E}];
    if (r.failed) {
      ++acc.failed;
      continue;
    }
    acc.values.push_back(r.value);
    if (r.partial) ++acc.partial;
  }
  std::vector<Aggregate> out;
  for (const auto& [key, acc] : groups) {
    Aggregate a;
    std::tie(a.family, a.scrambled, a.algorithm, a.metric, a.E) = key;
    a.n = static_cast<int>(acc.values.size());
    a.n_failed = acc.failed;
    a.n_partial = acc.partial;
    if (a.n == 0) {
      a.mean = a.ci_low = a.ci_high = std::numeric_limits<double>::quiet_NaN();
    } else {
      double sum = 0.0;
      for (double v : acc.values) sum += v;
      a.mean = sum / a.n;
      double half = 0.0;
      if (a.n > 1) {
        double ss = 0.0;
        for (double v : acc.values) ss += (v - a.mean) * (v - a.mean);
        half = 1.96 * std::sqrt(ss / (a.n - 1)) / std::sqrt(double(a.n));
      }
      a.ci_low = a.mean - half;
      a.ci_high = a.mean + half;
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace isr
