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
 * Plain-text file formats: feature tables, result rows, aggregate tables and
 * key=value configuration files. All numbers are written in the shortest
 * form that parses back to the same double, independent of locale.
 */
#ifndef ISR_IO_HPP_
#define ISR_IO_HPP_

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isr/datamodel.hpp"
#include "isr/harness.hpp"

namespace isr {

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" for
/// non-finite values.
std::string format_double(double v);

/// Inverse of format_double. Throws ParseError naming `what`.
double parse_double(std::string_view s, std::string_view what = "number");
long long parse_int(std::string_view s, std::string_view what = "integer");

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// Header `y,env,f0,...,f{d-1}`, one sample per row.
struct FeatureTable {
  Eigen::VectorXd y;
  std::vector<int> env;
  Eigen::MatrixXd x;

  Index rows() const { return x.rows(); }
  Index cols() const { return x.cols(); }
};

FeatureTable parse_feature_table(std::istream& in, const std::string& source);
FeatureTable read_feature_table(const std::filesystem::path& path);
void write_feature_table(std::ostream& out, const FeatureTable& table);

/// Rows in environment storage order.
FeatureTable to_table(const MultiEnvData<double>& data);
/// Groups rows by environment id (ascending, -1 first), keeping row order
/// within each environment.
MultiEnvData<double> to_multi_env(const FeatureTable& table, const Task& task);

inline constexpr std::string_view kResultsHeader =
    "family,scrambled,algorithm,E,seed,metric,value,wall_time_s,partial,"
    "failed,reason";

void write_results_csv(std::ostream& out, std::span<const ResultRecord> records);
std::vector<ResultRecord> parse_results_csv(std::istream& in,
                                            const std::string& source);

inline constexpr std::string_view kPlotdataHeader =
    "family,scrambled,algorithm,metric,E,mean,ci_low,ci_high,n,n_failed,"
    "n_partial";

void write_plotdata_csv(std::ostream& out, std::span<const Aggregate> rows);

/// JSON document with one object per aggregate plus record counts.
std::string aggregates_json(std::span<const Aggregate> rows,
                            std::span<const ResultRecord> records);

/// `key = value` lines; blank lines and lines starting with '#' ignored.
/// Later keys override earlier ones.
std::map<std::string, std::string> parse_config(std::istream& in,
                                                const std::string& source);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary file in the same directory and renames it.
void write_text_file(const std::filesystem::path& path,
                     const std::string& contents);

}  // namespace isr

#endif  // ISR_IO_HPP_
