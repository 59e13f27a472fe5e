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

#ifndef ISR_DATAMODEL_HPP_
#define ISR_DATAMODEL_HPP_

#include <algorithm>
#include <cmath>
#include <compare>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "isr/error.hpp"
#include "isr/numerics.hpp"

namespace isr {

enum class TaskKind { Binary, Multiclass, Regression };

struct Task {
  TaskKind kind = TaskKind::Binary;
  int classes = 2;  ///< 0 for regression

  static Task binary() { return {TaskKind::Binary, 2}; }
  static Task multiclass(int k) { return {TaskKind::Multiclass, k}; }
  static Task regression() { return {TaskKind::Regression, 0}; }

  bool is_classification() const { return kind != TaskKind::Regression; }
  bool operator==(const Task&) const = default;
};

/// Rows with env_id == kUnlabeledEnv carry no environment label: they are
/// used for fitting predictors but never for moment estimation.
inline constexpr int kUnlabeledEnv = -1;

template <typename Scalar>
struct EnvDataset {
  int env_id = 0;
  Matrix<Scalar> x;  ///< n x d
  Vector<Scalar> y;  ///< class index in [0, k) or real target

  Index size() const { return x.rows(); }
};

struct GroupKey {
  int label = 0;
  int env_id = 0;
  auto operator<=>(const GroupKey&) const = default;
};

/// Labeled samples partitioned by environment.
template <typename Scalar>
class MultiEnvData {
 public:
  MultiEnvData() = default;

  MultiEnvData(std::vector<EnvDataset<Scalar>> envs, Index d, Task task)
      : envs_(std::move(envs)), d_(d), task_(task) {
    if (envs_.empty()) {
      throw Error(ErrorCode::EmptyInput, "MultiEnvData: no environments");
    }
    if (task_.kind == TaskKind::Multiclass && task_.classes < 1) {
      throw Error(ErrorCode::InvalidParameter, "MultiEnvData: k < 1");
    }
    std::set<int> seen;
    for (const auto& env : envs_) {
      if (env.env_id < kUnlabeledEnv) {
        throw Error(ErrorCode::InvalidParameter,
                    "MultiEnvData: negative env id " +
                        std::to_string(env.env_id));
      }
      if (!seen.insert(env.env_id).second) {
        throw Error(ErrorCode::InvalidParameter,
                    "MultiEnvData: duplicate env id " +
                        std::to_string(env.env_id));
      }
      if (env.x.cols() != d_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "MultiEnvData: env " + std::to_string(env.env_id) +
                        " has " + std::to_string(env.x.cols()) +
                        " columns, expected " + std::to_string(d_));
      }
      if (env.x.rows() != env.y.size()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "MultiEnvData: x/y length mismatch in env " +
                        std::to_string(env.env_id));
      }
      if (!env.x.allFinite() || !env.y.allFinite()) {
        throw Error(ErrorCode::InvalidMatrix,
                    "MultiEnvData: non-finite entry in env " +
                        std::to_string(env.env_id));
      }
      if (task_.is_classification()) {
        for (Index i = 0; i < env.y.size(); ++i) {
          const Scalar v = env.y(i);
          if (v != std::round(v) || v < 0 || v >= task_.classes) {
            throw Error(ErrorCode::InvalidParameter,
                        "MultiEnvData: label outside [0, k) in env " +
                            std::to_string(env.env_id));
          }
        }
      }
    }
  }

  const std::vector<EnvDataset<Scalar>>& envs() const { return envs_; }
  Index d() const { return d_; }
  const Task& task() const { return task_; }
  Index num_envs() const { return static_cast<Index>(envs_.size()); }

  const EnvDataset<Scalar>& env(int env_id) const {
    for (const auto& e : envs_) {
      if (e.env_id == env_id) return e;
    }
    throw Error(ErrorCode::InvalidParameter,
                "no environment with id " + std::to_string(env_id));
  }

  /// Ids of environments usable for moment estimation, in storage order.
  std::vector<int> labeled_env_ids() const {
    std::vector<int> ids;
    for (const auto& e : envs_) {
      if (e.env_id != kUnlabeledEnv) ids.push_back(e.env_id);
    }
    return ids;
  }

  Index total_size() const {
    Index n = 0;
    for (const auto& e : envs_) n += e.size();
    return n;
  }

  /// All rows of every environment (labeled or not), in storage order.
  Matrix<Scalar> stacked_x() const {
    Matrix<Scalar> out(total_size(), d_);
    Index r = 0;
    for (const auto& e : envs_) {
      out.middleRows(r, e.size()) = e.x;
      r += e.size();
    }
    return out;
  }

  Vector<Scalar> stacked_y() const {
    Vector<Scalar> out(total_size());
    Index r = 0;
    for (const auto& e : envs_) {
      out.segment(r, e.size()) = e.y;
      r += e.size();
    }
    return out;
  }

 private:
  std::vector<EnvDataset<Scalar>> envs_;
  Index d_ = 0;
  Task task_;
};

/// Rows of `env.x` whose label equals `label`.
template <typename Scalar>
Matrix<Scalar> rows_with_label(const EnvDataset<Scalar>& env, int label) {
  std::vector<Index> idx;
  for (Index i = 0; i < env.y.size(); ++i) {
    if (static_cast<int>(std::lround(env.y(i))) == label) idx.push_back(i);
  }
  Matrix<Scalar> out(static_cast<Index>(idx.size()), env.x.cols());
  for (Index r = 0; r < out.rows(); ++r) out.row(r) = env.x.row(idx[r]);
  return out;
}

template <typename Scalar>
Vector<Scalar> sample_mean(const Matrix<Scalar>& rows) {
  return rows.colwise().sum().transpose() / static_cast<Scalar>(rows.rows());
}

/// Mean-centered second moment with divisor n.
template <typename Scalar>
Matrix<Scalar> sample_cov(const Matrix<Scalar>& rows) {
  const Vector<Scalar> mu = sample_mean(rows);
  const Matrix<Scalar> centered = rows.rowwise() - mu.transpose();
  Matrix<Scalar> cov = centered.transpose() * centered /
                       static_cast<Scalar>(rows.rows());
  return (cov + cov.transpose()) / Scalar(2);
}

template <typename Scalar>
Vector<Scalar> cond_mean(const MultiEnvData<Scalar>& data, int env_id,
                         int label) {
  const Matrix<Scalar> rows = rows_with_label(data.env(env_id), label);
  if (rows.rows() == 0) {
    throw Error(ErrorCode::EmptyClass,
                "no sample with label " + std::to_string(label) +
                    " in env " + std::to_string(env_id));
  }
  return sample_mean(rows);
}

template <typename Scalar>
Matrix<Scalar> cond_cov(const MultiEnvData<Scalar>& data, int env_id,
                        int label) {
  const Matrix<Scalar> rows = rows_with_label(data.env(env_id), label);
  if (rows.rows() < 2) {
    throw Error(ErrorCode::InsufficientSamples,
                "fewer than 2 samples with label " + std::to_string(label) +
                    " in env " + std::to_string(env_id));
  }
  return sample_cov(rows);
}

template <typename Scalar>
Vector<Scalar> env_mean(const MultiEnvData<Scalar>& data, int env_id) {
  const auto& env = data.env(env_id);
  if (env.size() == 0) {
    throw Error(ErrorCode::EmptyClass,
                "env " + std::to_string(env_id) + " has no samples");
  }
  return sample_mean(env.x);
}

/// What the subspace-recovery algorithms consume: per-environment first and
/// second moments, either estimated from samples or known in closed form.
template <typename Scalar>
class MomentSource {
 public:
  virtual ~MomentSource() = default;
  virtual Index dim() const = 0;
  virtual Task task() const = 0;
  virtual std::vector<int> env_ids() const = 0;
  virtual Vector<Scalar> cond_mean(int env_id, int label) const = 0;
  virtual Matrix<Scalar> cond_cov(int env_id, int label) const = 0;
  virtual Vector<Scalar> env_mean(int env_id) const = 0;
};

/// Moment estimates from a dataset. Holds a reference; the dataset must
/// outlive it.
template <typename Scalar>
class SampleMoments final : public MomentSource<Scalar> {
 public:
  explicit SampleMoments(const MultiEnvData<Scalar>& data) : data_(&data) {}

  Index dim() const override { return data_->d(); }
  Task task() const override { return data_->task(); }
  std::vector<int> env_ids() const override {
    return data_->labeled_env_ids();
  }
  Vector<Scalar> cond_mean(int env_id, int label) const override {
    return isr::cond_mean(*data_, env_id, label);
  }
  Matrix<Scalar> cond_cov(int env_id, int label) const override {
    return isr::cond_cov(*data_, env_id, label);
  }
  Vector<Scalar> env_mean(int env_id) const override {
    return isr::env_mean(*data_, env_id);
  }

 private:
  const MultiEnvData<Scalar>* data_;
};

}  // namespace isr

#endif  // ISR_DATAMODEL_HPP_
