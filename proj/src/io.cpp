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

#include "isr/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>

#include <json.hpp>

#include "isr/error.hpp"

namespace isr {

namespace {

[[noreturn]] void parse_error(const std::string& source, std::size_t line,
                              const std::string& what) {
  throw Error(ErrorCode::ParseError,
              source + ":" + std::to_string(line) + ": " + what);
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

bool parse_bool(std::string_view s, const std::string& source,
                std::size_t line, std::string_view column) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  parse_error(source, line,
              "column " + std::string(column) + ": expected true/false, got '" +
                  std::string(s) + "'");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return std::signbit(v) ? "-0" : "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::string_view body = s;
  if (!body.empty() && body.front() == '+') body.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
  if (body.empty() || res.ec != std::errc() ||
      res.ptr != body.data() + body.size()) {
    throw Error(ErrorCode::ParseError, "invalid " + std::string(what) + " '" +
                                           std::string(s) + "'");
  }
  return v;
}

long long parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError, "invalid " + std::string(what) + " '" +
                                           std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

FeatureTable parse_feature_table(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) parse_error(source, 1, "empty file");
  const auto header = split(strip_cr(line), ',');
  if (header.size() < 2 || header[0] != "y" || header[1] != "env") {
    parse_error(source, 1,
                "header must start with 'y,env', got '" +
                    (header.empty() ? std::string() : header[0]) + "'");
  }
  const Index d = static_cast<Index>(header.size()) - 2;
  for (Index j = 0; j < d; ++j) {
    const std::string expected = "f" + std::to_string(j);
    if (header[static_cast<std::size_t>(j + 2)] != expected) {
      parse_error(source, 1,
                  "unexpected column '" + header[static_cast<std::size_t>(j + 2)] +
                      "', expected '" + expected + "'");
    }
  }
  std::vector<double> ys;
  std::vector<int> envs;
  std::vector<double> xs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = strip_cr(line);
    if (body.empty()) continue;
    const auto cells = split(body, ',');
    if (cells.size() != header.size()) {
      parse_error(source, line_no,
                  "expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(cells.size()));
    }
    try {
      ys.push_back(parse_double(cells[0], "y"));
      envs.push_back(static_cast<int>(parse_int(cells[1], "env")));
      for (Index j = 0; j < d; ++j) {
        const auto& cell = cells[static_cast<std::size_t>(j + 2)];
        xs.push_back(parse_double(cell, "f" + std::to_string(j)));
      }
    } catch (const Error& e) {
      parse_error(source, line_no, e.what());
    }
    if (!std::isfinite(ys.back()) ||
        !std::all_of(xs.end() - d, xs.end(),
                     [](double v) { return std::isfinite(v); })) {
      parse_error(source, line_no, "non-finite value");
    }
  }
  FeatureTable t;
  const Index n = static_cast<Index>(ys.size());
  t.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), n);
  t.env = std::move(envs);
  t.x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>(xs.data(), n, d);
  return t;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  }
  return parse_feature_table(in, path.string());
}

void write_feature_table(std::ostream& out, const FeatureTable& table) {
  std::string buf = "y,env";
  for (Index j = 0; j < table.cols(); ++j) buf += ",f" + std::to_string(j);
  buf += '\n';
  for (Index i = 0; i < table.rows(); ++i) {
    buf += format_double(table.y(i));
    buf += ',';
    buf += std::to_string(table.env[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < table.cols(); ++j) {
      buf += ',';
      buf += format_double(table.x(i, j));
    }
    buf += '\n';
  }
  out << buf;
}

FeatureTable to_table(const MultiEnvData<double>& data) {
  FeatureTable t;
  t.x = data.stacked_x();
  t.y = data.stacked_y();
  for (const auto& e : data.envs()) {
    t.env.insert(t.env.end(), static_cast<std::size_t>(e.size()), e.env_id);
  }
  return t;
}

MultiEnvData<double> to_multi_env(const FeatureTable& table, const Task& task) {
  std::map<int, std::vector<Index>> rows;
  for (Index i = 0; i < table.rows(); ++i) {
    rows[table.env[static_cast<std::size_t>(i)]].push_back(i);
  }
  std::vector<EnvDataset<double>> envs;
  for (const auto& [id, idx] : rows) {
    EnvDataset<double> e;
    e.env_id = id;
    e.x.resize(static_cast<Index>(idx.size()), table.cols());
    e.y.resize(static_cast<Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      e.x.row(static_cast<Index>(r)) = table.x.row(idx[r]);
      e.y(static_cast<Index>(r)) = table.y(idx[r]);
    }
    envs.push_back(std::move(e));
  }
  return MultiEnvData<double>(std::move(envs), table.cols(), task);
}

void write_results_csv(std::ostream& out,
                       std::span<const ResultRecord> records) {
  std::string buf(kResultsHeader);
  buf += '\n';
  for (const auto& r : records) {
    buf += r.family + ',' + bool_text(r.scrambled) + ',' + r.algorithm + ',' +
           std::to_string(r.E) + ',' + std::to_string(r.seed) + ',' + r.metric +
           ',' + format_double(r.value) + ',' + format_double(r.wall_time_s) +
           ',' + bool_text(r.partial) + ',' + bool_text(r.failed) + ',' +
           r.reason + '\n';
  }
  out << buf;
}

std::vector<ResultRecord> parse_results_csv(std::istream& in,
                                            const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) parse_error(source, 1, "empty file");
  const auto header = split(strip_cr(line), ',');
  const auto expected = split(kResultsHeader, ',');
  for (const auto& col : expected) {
    if (std::find(header.begin(), header.end(), col) == header.end()) {
      parse_error(source, 1, "missing column '" + col + "'");
    }
  }
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  std::vector<ResultRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = strip_cr(line);
    if (body.empty()) continue;
    const auto cells = split(body, ',');
    if (cells.size() != header.size()) {
      parse_error(source, line_no,
                  "expected " + std::to_string(header.size()) +
                      " columns, got " + std::to_string(cells.size()));
    }
    auto cell = [&](const char* name) -> const std::string& {
      return cells[pos.at(name)];
    };
    ResultRecord r;
    try {
      r.family = cell("family");
      r.scrambled = parse_bool(cell("scrambled"), source, line_no, "scrambled");
      r.algorithm = cell("algorithm");
      r.E = static_cast<int>(parse_int(cell("E"), "E"));
      r.seed = static_cast<std::uint64_t>(parse_int(cell("seed"), "seed"));
      r.metric = cell("metric");
      r.value = parse_double(cell("value"), "value");
      r.wall_time_s = parse_double(cell("wall_time_s"), "wall_time_s");
      r.partial = parse_bool(cell("partial"), source, line_no, "partial");
      r.failed = parse_bool(cell("failed"), source, line_no, "failed");
      r.reason = cell("reason");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError &&
          std::string(e.what()).find(source) != std::string::npos) {
        throw;
      }
      parse_error(source, line_no, e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

void write_plotdata_csv(std::ostream& out, std::span<const Aggregate> rows) {
  std::string buf(kPlotdataHeader);
  buf += '\n';
  for (const auto& a : rows) {
    buf += a.family + ',' + bool_text(a.scrambled) + ',' + a.algorithm + ',' +
           a.metric + ',' + std::to_string(a.E) + ',' + format_double(a.mean) +
           ',' + format_double(a.ci_low) + ',' + format_double(a.ci_high) +
           ',' + std::to_string(a.n) + ',' + std::to_string(a.n_failed) + ',' +
           std::to_string(a.n_partial) + '\n';
  }
  out << buf;
}

std::string aggregates_json(std::span<const Aggregate> rows,
                            std::span<const ResultRecord> records) {
  using nlohmann::ordered_json;
  ordered_json doc;
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.failed ? 1 : 0;
  doc["records"] = records.size();
  doc["failed_records"] = failed;
  ordered_json list = ordered_json::array();
  for (const auto& a : rows) {
    ordered_json o;
    o["family"] = a.family;
    o["scrambled"] = a.scrambled;
    o["algorithm"] = a.algorithm;
    o["metric"] = a.metric;
    o["E"] = a.E;
    o["mean"] = a.mean;
    o["ci_low"] = a.ci_low;
    o["ci_high"] = a.ci_high;
    o["n"] = a.n;
    o["n_failed"] = a.n_failed;
    o["n_partial"] = a.n_partial;
    list.push_back(std::move(o));
  }
  doc["aggregates"] = std::move(list);
  return doc.dump(2) + "\n";
}

std::map<std::string, std::string> parse_config(std::istream& in,
                                                const std::string& source) {
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ConfigError,
                  source + ":" + std::to_string(line_no) +
                      ": expected key=value, got '" + std::string(body) + "'");
    }
    const auto key = trim(body.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::ConfigError,
                  source + ":" + std::to_string(line_no) + ": empty key");
    }
    kv[std::string(key)] = std::string(trim(body.substr(eq + 1)));
  }
  return kv;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::ConfigError, "cannot write " + path.string());
    }
    out << contents;
    if (!out) {
      throw Error(ErrorCode::ConfigError, "write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace isr
