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

// Command-line front end: run, generate, postprocess, plotdata.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "isr/commands.hpp"
#include "isr/error.hpp"
#include "isr/io.hpp"

namespace {

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("ISR_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  const auto s = isr::parse_int(v, "ISR_SEED");
  if (s < 0) {
    throw isr::Error(isr::ErrorCode::ConfigError, "ISR_SEED must be >= 0");
  }
  return static_cast<std::uint64_t>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant-feature subspace recovery: sweeps, datasets and "
               "feature post-processing"};
  app.require_subcommand(1);

  isr::RunOptions run;
  std::string run_config, run_csv, run_json;
  int run_jobs = 0;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment grid");
  run_cmd->add_option("config", run_config, "key = value config file");
  run_cmd->add_option("--set", run.overrides, "Override a config key (key=value)");
  run_cmd->add_option("--out", run_csv, "Results CSV path");
  run_cmd->add_option("--json", run_json, "Aggregate summary JSON path");
  run_cmd->add_option("--jobs", run_jobs, "Worker threads")->check(CLI::PositiveNumber);

  isr::GenerateOptions generate;
  std::string family = "Example3";
  std::string gen_out;
  long long gen_seed = -1;
  auto* gen_cmd = app.add_subcommand("generate", "Dump a benchmark instance");
  gen_cmd->add_option("--family", family, "Benchmark family")->capture_default_str();
  gen_cmd->add_option("--d-c", generate.spec.d_c, "Invariant dimension")->capture_default_str();
  gen_cmd->add_option("--d-s", generate.spec.d_s, "Spurious dimension")->capture_default_str();
  gen_cmd->add_option("--k", generate.spec.mc.k, "Classes (MulticlassLUT)")->capture_default_str();
  gen_cmd->add_option("--E", generate.spec.E, "Environments")->capture_default_str();
  gen_cmd->add_option("--n-per-env", generate.spec.n_per_env, "Samples per environment")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed, "Seed (default ISR_SEED or 0)");
  gen_cmd->add_flag("--scrambled", generate.spec.scrambled, "Random orthogonal mixing");
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  isr::PostprocessOptions post;
  std::string post_train, post_test, post_out;
  long long post_ds = -1, post_pca = -1;
  auto* post_cmd = app.add_subcommand("postprocess", "Fit ISR on a feature file");
  post_cmd->add_option("--train", post_train, "Training feature CSV")->required();
  post_cmd->add_option("--test", post_test, "Test feature CSV");
  post_cmd->add_option("--method", post.method,
                       "mean, cov, cov_robust, multiclass or regression")
      ->capture_default_str();
  post_cmd->add_option("--d-s", post_ds, "Spurious dimension (default: from spectrum)");
  post_cmd->add_option("--alpha", post.alpha, "Spurious scale; 0 projects")
      ->capture_default_str();
  post_cmd->add_option("--pca-dim", post_pca, "PCA pre-reduction dimension");
  post_cmd->add_option("--out", post_out, "Output directory")->required();

  isr::PlotdataOptions plot;
  std::string plot_in, plot_out;
  auto* plot_cmd = app.add_subcommand("plotdata", "Aggregate a results CSV");
  plot_cmd->add_option("results", plot_in, "Results CSV")->required();
  plot_cmd->add_option("--out", plot_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : isr::kExitUsage;
  }

  try {
    if (*run_cmd) {
      if (!run_config.empty()) run.config = run_config;
      if (!run_csv.empty()) run.csv = run_csv;
      if (!run_json.empty()) run.json = run_json;
      if (run_jobs > 0) run.jobs = run_jobs;
      run.seed = env_seed();
      return isr::cmd_run(run, std::cout, std::cerr);
    }
    if (*gen_cmd) {
      const auto f = isr::parse_family(family);
      if (!f) {
        std::cerr << "isr generate: unknown family '" << family
                  << "'; valid: " << isr::family_names() << '\n';
        return isr::kExitUsage;
      }
      generate.spec.family = *f;
      if (gen_seed >= 0) {
        generate.spec.seed = static_cast<std::uint64_t>(gen_seed);
      } else {
        generate.spec.seed = env_seed().value_or(0);
      }
      generate.out_dir = gen_out;
      return isr::cmd_generate(generate, std::cout, std::cerr);
    }
    if (*post_cmd) {
      post.train = post_train;
      if (!post_test.empty()) post.test = post_test;
      if (post_ds >= 0) post.d_s = post_ds;
      if (post_pca >= 0) post.pca_dim = post_pca;
      post.out_dir = post_out;
      return isr::cmd_postprocess(post, std::cout, std::cerr);
    }
    if (*plot_cmd) {
      plot.results = plot_in;
      plot.out = plot_out;
      return isr::cmd_plotdata(plot, std::cout, std::cerr);
    }
  } catch (const isr::Error& e) {
    std::cerr << "isr: " << e.what() << '\n';
    return isr::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "isr: " << e.what() << '\n';
    return 1;
  }
  return isr::kExitUsage;
}
