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
 * Bodies of the `isr` subcommands. Each returns a process exit code and
 * writes diagnostics to `err`; files are only written once all computation
 * has finished.
 */
#ifndef ISR_COMMANDS_HPP_
#define ISR_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isr/benchgen.hpp"
#include "isr/harness.hpp"

namespace isr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailedCells = 3;

struct RunConfig {
  ExperimentGrid grid;
  std::filesystem::path csv = "results.csv";
  std::filesystem::path json = "summary.json";
};

/// Builds a sweep from `key = value` pairs. Throws ConfigError naming the
/// key, and listing valid names for unknown families, algorithms or metrics.
RunConfig parse_run_config(const std::map<std::string, std::string>& kv);

/// Every key understood by parse_run_config.
const std::vector<std::string>& run_config_keys();

struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::vector<std::string> overrides;  ///< "key=value", applied after the file
  std::optional<std::filesystem::path> csv;
  std::optional<std::filesystem::path> json;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;  ///< replaces grid.seeds
};

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

struct GenerateOptions {
  GenSpec spec;
  std::filesystem::path out_dir;
};

/// Writes train.csv, test.csv, train_latents.csv, test_latents.csv and
/// truth.json into `out_dir`.
int cmd_generate(const GenerateOptions& opts, std::ostream& out,
                 std::ostream& err);

struct PostprocessOptions {
  std::filesystem::path train;
  std::optional<std::filesystem::path> test;
  std::string method = "mean";
  std::optional<Index> d_s;
  double alpha = 0.0;
  std::optional<Index> pca_dim;
  std::filesystem::path out_dir;
};

/// Writes features.csv (plus test_features.csv), model.json and
/// metrics.json into `out_dir`.
int cmd_postprocess(const PostprocessOptions& opts, std::ostream& out,
                    std::ostream& err);

struct PlotdataOptions {
  std::filesystem::path results;
  std::filesystem::path out;
};

int cmd_plotdata(const PlotdataOptions& opts, std::ostream& out,
                 std::ostream& err);

}  // namespace isr

#endif  // ISR_COMMANDS_HPP_
