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

#ifndef ISR_PREDICTORS_HPP_
#define ISR_PREDICTORS_HPP_

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

#include "isr/datamodel.hpp"
#include "isr/numerics.hpp"

namespace isr {

enum class Solver { GradientDescent, Newton };

struct FitConfig {
  int max_iters = 10000;
  double step = 0.1;
  double grad_tol = 1e-8;
  /// L2 penalty 0.5 * ridge * ||W||_F^2 on the weights (never the bias).
  double ridge = 1e-8;
  Solver solver = Solver::GradientDescent;

  void validate() const;
};

struct FitTrace {
  std::vector<double> loss;  ///< objective before each accepted step
  int iterations = 0;
  bool converged = false;
};

/// Affine predictor. Binary: one row, label 1 iff score > 0. Multiclass:
/// k rows of class scores (the last pinned to zero by the fitters), argmax
/// with the lowest class winning ties. Regression: one row, the prediction.
struct LinearModel {
  Task task;
  Eigen::MatrixXd weights;  ///< rows x p
  Eigen::VectorXd bias;

  Index input_dim() const { return weights.cols(); }

  /// n x rows matrix of raw scores.
  Eigen::MatrixXd decision(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  /// Same predictor expressed on the ambient coordinates of `basis`:
  /// x -> W (P x) + b becomes x -> (W P) x + b.
  LinearModel compose(const OrthonormalBasis<double>& basis) const;
};

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Mean logistic loss of theta = (w, b) on labels y (positive iff y > 0),
/// plus the ridge term.
LossGrad logistic_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& theta, double ridge = 0.0);

/// Mean cross-entropy with the last class pinned at zero. theta stacks
/// (w_j, b_j) for j = 0..k-2, each of length p + 1.
LossGrad softmax_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           int k, const Eigen::VectorXd& theta,
                           double ridge = 0.0);

LinearModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         const FitConfig& cfg = {}, FitTrace* trace = nullptr);

LinearModel fit_softmax(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        int k, const FitConfig& cfg = {},
                        FitTrace* trace = nullptr);

/// Ridge least squares with an unpenalized intercept.
LinearModel fit_linreg(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const FitConfig& cfg = {});

/// Dispatches on the task kind (binary -> logistic, multiclass -> softmax,
/// regression -> least squares).
LinearModel fit_erm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const Task& task, const FitConfig& cfg = {},
                    FitTrace* trace = nullptr);

/// Predictor acting on the first d_c latent coordinates, rewritten on
/// observations x = R z: weights become W [I 0] R^{-1}.
LinearModel compose_latent(const Eigen::MatrixXd& r,
                           const Eigen::MatrixXd& latent_weights,
                           const Eigen::VectorXd& bias, const Task& task);

/// Bayes-optimal invariant classifier for the binary Gaussian model:
/// w* = 2 mu_c / sigma_c^2, b* = log(eta / (1 - eta)).
LinearModel gaussian_binary_oracle(const Eigen::MatrixXd& r,
                                   const Eigen::VectorXd& mu_c, double sigma_c,
                                   double eta);

/// Bayes-optimal invariant classifier for isotropic Gaussian classes with
/// uniform prior (linear discriminant, last class pinned at zero).
LinearModel gaussian_multiclass_oracle(const Eigen::MatrixXd& r,
                                       const Eigen::MatrixXd& class_means,
                                       double sigma_c);

double classification_error(const LinearModel& model, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& y);
double mse(const LinearModel& model, const Eigen::MatrixXd& x,
           const Eigen::VectorXd& y);
double rmse(const LinearModel& model, const Eigen::MatrixXd& x,
            const Eigen::VectorXd& y);
/// 1 - SSE / SST, SST taken around the mean of y.
double r_squared(const LinearModel& model, const Eigen::MatrixXd& x,
                 const Eigen::VectorXd& y);

struct GroupMetric {
  GroupKey key;
  double value = 0.0;
  Index count = 0;
};

enum class Worst { Lowest, Highest };

/// Worst value over groups with count > 0; ties go to the smallest key.
std::pair<double, GroupKey> worst_group(std::span<const GroupMetric> groups,
                                        Worst direction);

}  // namespace isr

#endif  // ISR_PREDICTORS_HPP_
