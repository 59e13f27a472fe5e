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

#include "isr/commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "isr/error.hpp"
#include "isr/io.hpp"
#include "isr/numerics.hpp"

namespace isr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::ConfigError, key + ": " + what);
}

std::vector<std::string> list_value(const std::string& key,
                                    const std::string& value) {
  std::vector<std::string> out;
  for (const auto& item : split(value, ',')) {
    const auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  if (out.empty()) config_error(key, "empty list");
  return out;
}

long long int_value(const std::string& key, std::string_view s) {
  try {
    return parse_int(s, key);
  } catch (const Error&) {
    config_error(key, "expected an integer, got '" + std::string(s) + "'");
  }
}

double double_value(const std::string& key, std::string_view s) {
  try {
    return parse_double(s, key);
  } catch (const Error&) {
    config_error(key, "expected a number, got '" + std::string(s) + "'");
  }
}

bool bool_value(const std::string& key, std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  config_error(key, "expected true or false, got '" + std::string(s) + "'");
}

/// "a..b" or a single integer.
std::pair<long long, long long> range_value(const std::string& key,
                                            const std::string& value) {
  const auto dots = value.find("..");
  if (dots == std::string::npos) {
    const auto v = int_value(key, value);
    return {v, v};
  }
  const auto lo = int_value(key, trim(std::string_view(value).substr(0, dots)));
  const auto hi = int_value(key, trim(std::string_view(value).substr(dots + 2)));
  if (hi < lo) config_error(key, "empty range '" + value + "'");
  return {lo, hi};
}

/// Comma list whose items may be integers or a..b ranges.
std::vector<long long> int_list(const std::string& key,
                                const std::string& value) {
  std::vector<long long> out;
  for (const auto& item : list_value(key, value)) {
    const auto [lo, hi] = range_value(key, item);
    for (long long v = lo; v <= hi; ++v) out.push_back(v);
  }
  return out;
}

ordered_json matrix_json(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ordered_json vector_json(const VectorXd& v) {
  ordered_json out = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

int report(std::ostream& err, const std::string& command, const Error& e) {
  err << "isr " << command << ": " << e.what() << '\n';
  return kExitUsage;
}

}  // namespace

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "grid.families",    "grid.scrambled",      "grid.algorithms",
      "grid.E_range",     "grid.seeds",          "grid.metrics",
      "gen.d_c",          "gen.d_s",             "gen.k",
      "gen.n_per_env",    "isr.d_s",             "isr.rank_tol",
      "isr.cov_pair_min_gap", "isr.robust_n_pairs", "isr.scale_alpha",
      "fit.solver",       "fit.max_iters",       "fit.step",
      "fit.grad_tol",     "fit.ridge",           "output.csv",
      "output.json",      "output.timing",       "run.jobs",
  };
  return keys;
}

RunConfig parse_run_config(const std::map<std::string, std::string>& kv) {
  const auto& known = run_config_keys();
  for (const auto& [key, value] : kv) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      std::string valid;
      for (const auto& k : known) valid += (valid.empty() ? "" : ", ") + k;
      config_error(key, "unknown key; valid keys: " + valid);
    }
  }
  auto get = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  RunConfig cfg;
  ExperimentGrid& grid = cfg.grid;

  std::vector<Family> families;
  const auto fam_text = get("grid.families");
  if (!fam_text || trim(*fam_text).empty()) {
    config_error("grid.families", "required; valid: " + family_names());
  }
  for (const auto& name : list_value("grid.families", *fam_text)) {
    const auto f = parse_family(name);
    if (!f) {
      config_error("grid.families",
                   "unknown family '" + name + "'; valid: " + family_names());
    }
    families.push_back(*f);
  }

  const auto alg_text = get("grid.algorithms");
  if (!alg_text || trim(*alg_text).empty()) {
    config_error("grid.algorithms", "required; valid: " + algorithm_names());
  }
  for (const auto& name : list_value("grid.algorithms", *alg_text)) {
    const auto a = parse_algorithm(name);
    if (!a) {
      config_error("grid.algorithms", "unknown algorithm '" + name +
                                          "'; valid: " + algorithm_names());
    }
    grid.algorithms.push_back(*a);
  }

  if (const auto v = get("grid.metrics")) {
    grid.metrics.clear();
    for (const auto& name : list_value("grid.metrics", *v)) {
      const auto m = parse_metric(name);
      if (!m) {
        config_error("grid.metrics",
                     "unknown metric '" + name + "'; valid: " + metric_names());
      }
      grid.metrics.push_back(*m);
    }
  }

  std::vector<bool> scrambled = {false};
  if (const auto v = get("grid.scrambled")) {
    scrambled.clear();
    for (const auto& s : list_value("grid.scrambled", *v)) {
      scrambled.push_back(bool_value("grid.scrambled", s));
    }
  }

  if (const auto v = get("grid.E_range")) {
    const auto [lo, hi] = range_value("grid.E_range", *v);
    grid.e_min = static_cast<int>(lo);
    grid.e_max = static_cast<int>(hi);
  }

  grid.seeds.clear();
  for (long long s : int_list("grid.seeds", get("grid.seeds").value_or("0..9"))) {
    if (s < 0) config_error("grid.seeds", "seeds must be non-negative");
    grid.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  GenSpec base;
  if (const auto v = get("gen.d_c")) base.d_c = int_value("gen.d_c", *v);
  if (const auto v = get("gen.n_per_env")) {
    base.n_per_env = int_value("gen.n_per_env", *v);
  }
  std::vector<long long> d_s_list = {base.d_s};
  if (const auto v = get("gen.d_s")) d_s_list = int_list("gen.d_s", *v);
  std::vector<long long> k_list = {base.mc.k};
  if (const auto v = get("gen.k")) k_list = int_list("gen.k", *v);

  for (Family f : families) {
    for (bool scr : scrambled) {
      for (long long ds : d_s_list) {
        const auto& ks =
            f == Family::MulticlassLUT ? k_list : std::vector<long long>{base.mc.k};
        for (long long k : ks) {
          GenSpec s = base;
          s.family = f;
          s.scrambled = scr;
          s.d_s = ds;
          s.mc.k = static_cast<int>(k);
          grid.specs.push_back(s);
        }
      }
    }
  }

  if (const auto v = get("isr.d_s")) grid.isr.d_s = int_value("isr.d_s", *v);
  if (const auto v = get("isr.rank_tol")) {
    grid.isr.rank_tol = double_value("isr.rank_tol", *v);
  }
  if (const auto v = get("isr.cov_pair_min_gap")) {
    grid.isr.cov_pair_min_gap = double_value("isr.cov_pair_min_gap", *v);
  }
  if (const auto v = get("isr.robust_n_pairs")) {
    grid.isr.robust_n_pairs = int_value("isr.robust_n_pairs", *v);
  }
  if (const auto v = get("isr.scale_alpha")) {
    grid.isr.scale_alpha = double_value("isr.scale_alpha", *v);
  }

  if (const auto v = get("fit.solver")) {
    if (*v == "newton") {
      grid.fit.solver = Solver::Newton;
    } else if (*v == "gd") {
      grid.fit.solver = Solver::GradientDescent;
    } else {
      config_error("fit.solver", "unknown solver '" + *v + "'; valid: newton, gd");
    }
  }
  if (const auto v = get("fit.max_iters")) {
    grid.fit.max_iters = static_cast<int>(int_value("fit.max_iters", *v));
  }
  if (const auto v = get("fit.step")) grid.fit.step = double_value("fit.step", *v);
  if (const auto v = get("fit.grad_tol")) {
    grid.fit.grad_tol = double_value("fit.grad_tol", *v);
  }
  if (const auto v = get("fit.ridge")) grid.fit.ridge = double_value("fit.ridge", *v);

  if (const auto v = get("output.csv")) cfg.csv = *v;
  if (const auto v = get("output.json")) cfg.json = *v;
  if (const auto v = get("output.timing")) {
    grid.timing = bool_value("output.timing", *v);
  }
  if (const auto v = get("run.jobs")) {
    grid.jobs = static_cast<int>(int_value("run.jobs", *v));
  }

  try {
    grid.fit.validate();
    for (const auto& spec : grid.specs) {
      grid.isr.validate(spec.d_c + spec.d_s);
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  grid.validate();
  return cfg;
}

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    std::map<std::string, std::string> kv;
    if (opts.config) {
      std::istringstream in(read_text_file(*opts.config));
      kv = parse_config(in, opts.config->string());
    }
    for (const auto& o : opts.overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::ConfigError,
                    "override '" + o + "' is not key=value");
      }
      kv[std::string(trim(std::string_view(o).substr(0, eq)))] =
          std::string(trim(std::string_view(o).substr(eq + 1)));
    }
    if (opts.seed) kv["grid.seeds"] = std::to_string(*opts.seed);
    if (opts.jobs) kv["run.jobs"] = std::to_string(*opts.jobs);
    cfg = parse_run_config(kv);
    if (opts.csv) cfg.csv = *opts.csv;
    if (opts.json) cfg.json = *opts.json;
  } catch (const Error& e) {
    return report(err, "run", e);
  }

  std::vector<ResultRecord> records;
  std::string summary;
  try {
    records = run_grid(cfg.grid);
    const auto aggregates = aggregate(records);
    summary = aggregates_json(aggregates, records);
  } catch (const Error& e) {
    return report(err, "run", e);
  }

  std::ostringstream csv;
  write_results_csv(csv, records);
  write_text_file(cfg.csv, csv.str());
  write_text_file(cfg.json, summary);

  const auto failed = std::count_if(records.begin(), records.end(),
                                    [](const ResultRecord& r) { return r.failed; });
  out << records.size() << " records written to " << cfg.csv.string();
  if (failed > 0) out << " (" << failed << " failed)";
  out << '\n';
  return failed > 0 ? kExitFailedCells : kExitOk;
}

int cmd_generate(const GenerateOptions& opts, std::ostream& out,
                 std::ostream& err) {
  BenchInstance inst;
  std::vector<EnvLatents> test_latents;
  try {
    opts.spec.validate();
    inst = gen(opts.spec);
    test_latents = shuffled_test_latents(inst);
  } catch (const Error& e) {
    return report(err, "generate", e);
  }
  const Truth& t = inst.truth;

  auto latents_csv = [&](const std::vector<EnvLatents>& latents) {
    std::string buf = "env,y";
    for (Index j = 0; j < t.d_c; ++j) buf += ",zc" + std::to_string(j);
    for (Index j = 0; j < t.d_s; ++j) buf += ",ze" + std::to_string(j);
    buf += '\n';
    for (std::size_t e = 0; e < latents.size(); ++e) {
      const auto& lat = latents[e];
      for (Index i = 0; i < lat.y.size(); ++i) {
        buf += std::to_string(e) + ',' + format_double(lat.y(i));
        for (Index j = 0; j < t.d_c; ++j) buf += ',' + format_double(lat.z_c(i, j));
        for (Index j = 0; j < t.d_s; ++j) buf += ',' + format_double(lat.z_e(i, j));
        buf += '\n';
      }
    }
    return buf;
  };
  auto table_csv = [](const MultiEnvData<double>& data) {
    std::ostringstream s;
    write_feature_table(s, to_table(data));
    return s.str();
  };

  const GenSpec& spec = inst.spec;
  ordered_json truth;
  truth["family"] = std::string(to_string(spec.family));
  truth["scrambled"] = spec.scrambled;
  truth["d_c"] = spec.d_c;
  truth["d_s"] = spec.d_s;
  truth["E"] = spec.E;
  truth["n_per_env"] = spec.n_per_env;
  truth["seed"] = spec.seed;
  truth["task"] = spec.task().kind == TaskKind::Regression ? "regression"
                  : spec.task().kind == TaskKind::Binary   ? "binary"
                                                           : "multiclass";
  truth["classes"] = spec.task().classes;
  truth["mixing"] = matrix_json(t.r);
  truth["invariant_basis"] = matrix_json(truth_invariant_basis(inst).rows());
  switch (spec.family) {
    case Family::Example2:
      truth["p_e"] = t.p_e;
      truth["s_e"] = t.s_e;
      break;
    case Family::Example3:
    case Family::Example3Prime: {
      truth["mu_c"] = vector_json(t.mu_c);
      truth["sigma_c"] = t.sigma_c;
      truth["eta"] = t.eta;
      ordered_json mu_e = ordered_json::array();
      for (const auto& m : t.mu_e) mu_e.push_back(vector_json(m));
      truth["mu_e"] = std::move(mu_e);
      truth["sigma_e"] = t.sigma_e;
      break;
    }
    case Family::MulticlassLUT: {
      truth["class_means"] = matrix_json(t.class_means);
      ordered_json env_means = ordered_json::array();
      for (const auto& m : t.class_env_means) env_means.push_back(matrix_json(m));
      truth["class_env_means"] = std::move(env_means);
      truth["sigma_c"] = t.sigma_c;
      truth["sigma_e"] = t.sigma_e;
      break;
    }
    case Family::RegressionLUT: {
      truth["mu_c"] = vector_json(t.mu_c);
      truth["sigma_c"] = t.sigma_c;
      truth["w_c"] = vector_json(t.w_c);
      truth["b_c"] = t.b_c;
      truth["noise"] = t.noise;
      ordered_json w_cs = ordered_json::array();
      for (const auto& m : t.w_cs) w_cs.push_back(matrix_json(m));
      truth["w_cs"] = std::move(w_cs);
      ordered_json b_e = ordered_json::array();
      for (const auto& b : t.b_e) b_e.push_back(vector_json(b));
      truth["b_e"] = std::move(b_e);
      break;
    }
  }
  const LinearModel oracle = oracle_predictor(inst);
  truth["oracle"] = {{"weights", matrix_json(oracle.weights)},
                     {"bias", vector_json(oracle.bias)}};

  const auto& dir = opts.out_dir;
  write_text_file(dir / "train.csv", table_csv(inst.train));
  write_text_file(dir / "test.csv", table_csv(inst.test));
  write_text_file(dir / "train_latents.csv", latents_csv(t.train_latents));
  write_text_file(dir / "test_latents.csv", latents_csv(test_latents));
  write_text_file(dir / "truth.json", truth.dump(2) + "\n");
  out << "wrote " << family_label(spec) << " E=" << spec.E
      << " seed=" << spec.seed << " to " << dir.string() << '\n';
  return kExitOk;
}

int cmd_postprocess(const PostprocessOptions& opts, std::ostream& out,
                    std::ostream& err) {
  ordered_json model_doc;
  ordered_json metrics_doc;
  std::string features_csv;
  std::string test_features_csv;
  try {
    IsrMethod method{};
    Task task;
    if (opts.method == "mean") {
      method = IsrMethod::Mean;
    } else if (opts.method == "cov") {
      method = IsrMethod::Cov;
    } else if (opts.method == "cov_robust") {
      method = IsrMethod::CovRobust;
    } else if (opts.method == "multiclass") {
      method = IsrMethod::Multiclass;
    } else if (opts.method == "regression") {
      method = IsrMethod::Regression;
    } else {
      throw Error(ErrorCode::ConfigError,
                  "unknown method '" + opts.method +
                      "'; valid: mean, cov, cov_robust, multiclass, regression");
    }

    const FeatureTable train_table = read_feature_table(opts.train);
    std::optional<FeatureTable> test_table;
    if (opts.test) {
      test_table = read_feature_table(*opts.test);
      if (test_table->cols() != train_table.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "test file has " + std::to_string(test_table->cols()) +
                        " feature columns, train has " +
                        std::to_string(train_table.cols()));
      }
    }
    if (train_table.rows() == 0) {
      throw Error(ErrorCode::EmptyInput, opts.train.string() + " has no rows");
    }
    if (method == IsrMethod::Regression) {
      task = Task::regression();
    } else if (method == IsrMethod::Multiclass) {
      double top = train_table.y.maxCoeff();
      if (test_table && test_table->rows() > 0) {
        top = std::max(top, test_table->y.maxCoeff());
      }
      task = Task::multiclass(std::max(2, static_cast<int>(top) + 1));
    } else {
      task = Task::binary();
    }

    const Index d = train_table.cols();
    MatrixXd pca = MatrixXd::Identity(d, d);
    if (opts.pca_dim) {
      const Index p = *opts.pca_dim;
      if (p < 1 || p > d) {
        throw Error(ErrorCode::InvalidParameter,
                    "pca dimension must be in [1, " + std::to_string(d) + "]");
      }
      const auto eig = sym_eig(sample_cov<double>(train_table.x));
      pca = eig.vectors.rows().bottomRows(p).colwise().reverse();
    }
    auto reduce = [&](FeatureTable t) {
      if (opts.pca_dim) t.x = t.x * pca.transpose();
      return t;
    };
    const FeatureTable train_red = reduce(train_table);
    const auto train_data = to_multi_env(train_red, task);

    IsrConfig cfg;
    cfg.d_s = opts.d_s;
    cfg.scale_alpha = opts.alpha;
    cfg.validate(train_red.cols());
    const FitConfig fit = harness_fit_config();
    const IsrPipeline pipe = fit_isr_pipeline(method, train_data, cfg, fit);
    const LinearModel raw{task, pipe.full.model.weights * pca,
                          pipe.full.model.bias};

    auto transformed = [&](const FeatureTable& t) {
      FeatureTable f = reduce(t);
      f.x = transform_features(pipe.projection, f.x, opts.alpha);
      std::ostringstream s;
      write_feature_table(s, f);
      return s.str();
    };
    features_csv = transformed(train_table);
    if (test_table) test_features_csv = transformed(*test_table);

    const auto& proj = pipe.projection;
    model_doc["method"] = std::string(to_string(method));
    model_doc["input_dim"] = d;
    model_doc["pca_dim"] = opts.pca_dim ? ordered_json(*opts.pca_dim) : ordered_json();
    if (opts.pca_dim) model_doc["pca_basis"] = matrix_json(pca);
    model_doc["d_s_used"] = proj.d_s_used;
    model_doc["partial"] = proj.partial;
    model_doc["alpha"] = opts.alpha;
    model_doc["spectrum"] = vector_json(proj.spectrum.values);
    model_doc["invariant_basis"] = matrix_json(proj.invariant_basis.rows());
    model_doc["spurious_basis"] = matrix_json(proj.spurious_basis.rows());
    model_doc["head"] = {{"weights", matrix_json(pipe.head.weights)},
                         {"bias", vector_json(pipe.head.bias)}};
    model_doc["model"] = {{"weights", matrix_json(raw.weights)},
                         {"bias", vector_json(raw.bias)}};

    auto metrics = [&](const FeatureTable& table) {
      const auto data = to_multi_env(table, task);
      ordered_json m;
      m["mean_error"] = evaluate(raw, data, Metric::MeanError);
      if (task.kind == TaskKind::Regression) {
        m["rmse"] = evaluate(raw, data, Metric::Rmse);
        m["r2"] = evaluate(raw, data, Metric::R2);
      }
      const auto groups = group_metrics(raw, data);
      const auto [worst, key] = worst_group(groups, Worst::Highest);
      m["worst_group"] = worst;
      m["worst_group_key"] = {{"label", key.label}, {"env", key.env_id}};
      ordered_json list = ordered_json::array();
      for (const auto& g : groups) {
        list.push_back({{"label", g.key.label},
                        {"env", g.key.env_id},
                        {"value", g.value},
                        {"count", g.count}});
      }
      m["groups"] = std::move(list);
      return m;
    };
    metrics_doc["method"] = std::string(to_string(method));
    metrics_doc["partial"] = proj.partial;
    metrics_doc["train"] = metrics(train_table);
    if (test_table) metrics_doc["test"] = metrics(*test_table);
  } catch (const Error& e) {
    return report(err, "postprocess", e);
  }

  const auto& dir = opts.out_dir;
  write_text_file(dir / "features.csv", features_csv);
  if (opts.test) write_text_file(dir / "test_features.csv", test_features_csv);
  write_text_file(dir / "model.json", model_doc.dump(2) + "\n");
  write_text_file(dir / "metrics.json", metrics_doc.dump(2) + "\n");
  out << "wrote features.csv, model.json and metrics.json to " << dir.string()
      << '\n';
  return kExitOk;
}

int cmd_plotdata(const PlotdataOptions& opts, std::ostream& out,
                 std::ostream& err) {
  std::string csv;
  try {
    std::ifstream in(opts.results);
    if (!in) {
      throw Error(ErrorCode::ParseError, "cannot open " + opts.results.string());
    }
    const auto records = parse_results_csv(in, opts.results.string());
    if (records.empty()) {
      throw Error(ErrorCode::EmptyInput,
                  opts.results.string() + " has no result rows");
    }
    std::ostringstream s;
    write_plotdata_csv(s, aggregate(records));
    csv = s.str();
  } catch (const Error& e) {
    return report(err, "plotdata", e);
  }
  write_text_file(opts.out, csv);
  out << "wrote " << opts.out.string() << '\n';
  return kExitOk;
}

}  // namespace isr
