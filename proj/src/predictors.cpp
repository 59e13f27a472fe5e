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

#include "isr/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <string>

#include "isr/error.hpp"

namespace isr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_xy(const MatrixXd& x, const VectorXd& y, const char* what) {
  if (x.rows() != y.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": x has " + std::to_string(x.rows()) +
                    " rows but y has " + std::to_string(y.size()));
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw Error(ErrorCode::InvalidMatrix,
                std::string(what) + ": non-finite input");
  }
}

int label_of(double v) { return static_cast<int>(std::lround(v)); }

struct Objective {
  std::function<LossGrad(const VectorXd&)> eval;
  std::function<MatrixXd(const VectorXd&)> hessian;
};

VectorXd gradient_descent(const Objective& obj, VectorXd theta,
                          const FitConfig& cfg, FitTrace* trace) {
  LossGrad cur = obj.eval(theta);
  double step = cfg.step;
  int it = 0;
  bool converged = false;
  for (; it < cfg.max_iters; ++it) {
    if (trace) trace->loss.push_back(cur.loss);
    if (cur.grad.norm() < cfg.grad_tol) {
      converged = true;
      break;
    }
    bool accepted = false;
    while (step > 1e-20) {
      VectorXd cand = theta - step * cur.grad;
      LossGrad next = obj.eval(cand);
      if (std::isfinite(next.loss) && next.loss <= cur.loss) {
        theta = std::move(cand);
        cur = std::move(next);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      converged = true;
      break;
    }
  }
  if (trace) {
    trace->iterations = it;
    trace->converged = converged;
  }
  return theta;
}

VectorXd newton(const Objective& obj, VectorXd theta, const FitConfig& cfg,
                FitTrace* trace) {
  LossGrad cur = obj.eval(theta);
  int it = 0;
  bool converged = false;
  for (; it < cfg.max_iters; ++it) {
    if (trace) trace->loss.push_back(cur.loss);
    if (cur.grad.norm() < cfg.grad_tol) {
      converged = true;
      break;
    }
    MatrixXd h = obj.hessian(theta);
    VectorXd dir;
    double damping = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::LDLT<MatrixXd> ldlt(h + damping *
                                         MatrixXd::Identity(h.rows(), h.cols()));
      if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        dir = ldlt.solve(cur.grad);
        if (dir.allFinite() && dir.dot(cur.grad) > 0) break;
      }
      damping = damping == 0.0 ? 1e-10 * (1.0 + h.diagonal().cwiseAbs().maxCoeff())
                               : damping * 10.0;
      dir.resize(0);
    }
    if (dir.size() == 0) dir = cur.grad;
    const double slope = dir.dot(cur.grad);
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-14) {
      VectorXd cand = theta - t * dir;
      LossGrad next = obj.eval(cand);
      if (std::isfinite(next.loss) && next.loss <= cur.loss - 1e-4 * t * slope) {
        const double drop = cur.loss - next.loss;
        theta = std::move(cand);
        cur = std::move(next);
        accepted = true;
        if (drop <= 1e-16 * std::max(1.0, std::abs(cur.loss))) {
          converged = true;
        }
        break;
      }
      t *= 0.5;
    }
    if (!accepted || converged) {
      converged = true;
      ++it;
      break;
    }
  }
  if (trace) {
    trace->iterations = it;
    trace->converged = converged;
  }
  return theta;
}

VectorXd minimize(const Objective& obj, VectorXd theta, const FitConfig& cfg,
                  FitTrace* trace) {
  return cfg.solver == Solver::Newton ? newton(obj, std::move(theta), cfg, trace)
                                      : gradient_descent(obj, std::move(theta),
                                                         cfg, trace);
}

MatrixXd augmented(const MatrixXd& x) {
  MatrixXd a(x.rows(), x.cols() + 1);
  a.leftCols(x.cols()) = x;
  a.col(x.cols()).setOnes();
  return a;
}

// n x k score matrix, last column zero.
MatrixXd softmax_scores(const MatrixXd& xa, int k, const VectorXd& theta) {
  const Index q = xa.cols();
  MatrixXd s = MatrixXd::Zero(xa.rows(), k);
  for (int j = 0; j + 1 < k; ++j) s.col(j) = xa * theta.segment(j * q, q);
  return s;
}

MatrixXd softmax_probs(const MatrixXd& scores) {
  MatrixXd p(scores.rows(), scores.cols());
  for (Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    const auto e = (scores.row(i).array() - m).exp();
    p.row(i) = e / e.sum();
  }
  return p;
}

}  // namespace

void FitConfig::validate() const {
  if (max_iters < 0) {
    throw Error(ErrorCode::InvalidParameter, "max_iters must be >= 0");
  }
  if (!(step > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "step must be positive");
  }
  if (!(grad_tol > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "grad_tol must be positive");
  }
  if (!(ridge >= 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "ridge must be nonnegative");
  }
}

MatrixXd LinearModel::decision(const MatrixXd& x) const {
  if (x.cols() != weights.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "model expects " + std::to_string(weights.cols()) +
                    " features, got " + std::to_string(x.cols()));
  }
  return (x * weights.transpose()).rowwise() + bias.transpose();
}

VectorXd LinearModel::predict(const MatrixXd& x) const {
  const MatrixXd s = decision(x);
  VectorXd out(x.rows());
  switch (task.kind) {
    case TaskKind::Binary:
      for (Index i = 0; i < s.rows(); ++i) out(i) = s(i, 0) > 0.0 ? 1.0 : 0.0;
      break;
    case TaskKind::Multiclass:
      for (Index i = 0; i < s.rows(); ++i) {
        Index arg = 0;
        s.row(i).maxCoeff(&arg);
        out(i) = static_cast<double>(arg);
      }
      break;
    case TaskKind::Regression:
      out = s.col(0);
      break;
  }
  return out;
}

LinearModel LinearModel::compose(const OrthonormalBasis<double>& basis) const {
  if (basis.dim() != weights.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "compose: basis dimension differs from model input");
  }
  return LinearModel{task, weights * basis.rows(), bias};
}

LossGrad logistic_objective(const MatrixXd& x, const VectorXd& y,
                            const VectorXd& theta, double ridge) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (theta.size() != p + 1) {
    throw Error(ErrorCode::DimensionMismatch,
                "logistic_objective: theta must have p + 1 entries");
  }
  const VectorXd z = x * theta.head(p) + VectorXd::Constant(n, theta(p));
  VectorXd resid(n);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double t = y(i) > 0 ? 1.0 : 0.0;
    loss += softplus(z(i)) - t * z(i);
    resid(i) = sigmoid(z(i)) - t;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  LossGrad out;
  out.loss = loss * inv_n + 0.5 * ridge * theta.head(p).squaredNorm();
  out.grad.resize(p + 1);
  out.grad.head(p) = x.transpose() * resid * inv_n + ridge * theta.head(p);
  out.grad(p) = resid.sum() * inv_n;
  return out;
}

LossGrad softmax_objective(const MatrixXd& x, const VectorXd& y, int k,
                           const VectorXd& theta, double ridge) {
  const Index n = x.rows();
  const Index p = x.cols();
  const Index q = p + 1;
  if (k < 2 || theta.size() != (k - 1) * q) {
    throw Error(ErrorCode::DimensionMismatch,
                "softmax_objective: theta must have (k - 1)(p + 1) entries");
  }
  const MatrixXd xa = augmented(x);
  const MatrixXd s = softmax_scores(xa, k, theta);
  MatrixXd probs = softmax_probs(s);
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = s.row(i).maxCoeff();
    const double lse = m + std::log((s.row(i).array() - m).exp().sum());
    const int yi = label_of(y(i));
    loss += lse - s(i, yi);
    probs(i, yi) -= 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  LossGrad out;
  out.loss = loss * inv_n;
  out.grad.resize(theta.size());
  for (int j = 0; j + 1 < k; ++j) {
    const auto w = theta.segment(j * q, p);
    out.loss += 0.5 * ridge * w.squaredNorm();
    out.grad.segment(j * q, q) = xa.transpose() * probs.col(j) * inv_n;
    out.grad.segment(j * q, p) += ridge * w;
  }
  return out;
}

LinearModel fit_logistic(const MatrixXd& x, const VectorXd& y,
                         const FitConfig& cfg, FitTrace* trace) {
  cfg.validate();
  check_xy(x, y, "fit_logistic");
  const Index n = x.rows();
  const Index p = x.cols();
  Index positives = 0;
  for (Index i = 0; i < n; ++i) positives += y(i) > 0 ? 1 : 0;
  if (n < 2 || positives == 0 || positives == n) {
    throw Error(ErrorCode::DegenerateLabels,
                "fit_logistic: both classes must be present");
  }
  const double ridge = cfg.ridge;
  Objective obj;
  obj.eval = [&](const VectorXd& th) {
    return logistic_objective(x, y, th, ridge);
  };
  obj.hessian = [&](const VectorXd& th) {
    const MatrixXd xa = augmented(x);
    const VectorXd z = xa * th;
    VectorXd w(n);
    for (Index i = 0; i < n; ++i) {
      const double s = sigmoid(z(i));
      w(i) = s * (1.0 - s);
    }
    MatrixXd h = xa.transpose() * w.asDiagonal() * xa / static_cast<double>(n);
    h.topLeftCorner(p, p).diagonal().array() += ridge;
    return h;
  };
  const VectorXd theta = minimize(obj, VectorXd::Zero(p + 1), cfg, trace);
  LinearModel m;
  m.task = Task::binary();
  m.weights = theta.head(p).transpose();
  m.bias = VectorXd::Constant(1, theta(p));
  return m;
}

LinearModel fit_softmax(const MatrixXd& x, const VectorXd& y, int k,
                        const FitConfig& cfg, FitTrace* trace) {
  cfg.validate();
  check_xy(x, y, "fit_softmax");
  if (k < 2) {
    throw Error(ErrorCode::InvalidParameter, "fit_softmax: k must be >= 2");
  }
  std::set<int> present;
  for (Index i = 0; i < y.size(); ++i) {
    const int yi = label_of(y(i));
    if (yi < 0 || yi >= k || y(i) != static_cast<double>(yi)) {
      throw Error(ErrorCode::InvalidParameter,
                  "fit_softmax: label outside [0, k)");
    }
    present.insert(yi);
  }
  if (present.size() < 2) {
    throw Error(ErrorCode::DegenerateLabels,
                "fit_softmax: at least two classes must be present");
  }
  const Index n = x.rows();
  const Index p = x.cols();
  const Index q = p + 1;
  const double ridge = cfg.ridge;
  const MatrixXd xa = augmented(x);
  Objective obj;
  obj.eval = [&](const VectorXd& th) {
    return softmax_objective(x, y, k, th, ridge);
  };
  obj.hessian = [&](const VectorXd& th) {
    const MatrixXd probs = softmax_probs(softmax_scores(xa, k, th));
    MatrixXd h((k - 1) * q, (k - 1) * q);
    for (int a = 0; a + 1 < k; ++a) {
      for (int b = a; b + 1 < k; ++b) {
        VectorXd w = -probs.col(a).cwiseProduct(probs.col(b));
        if (a == b) w += probs.col(a);
        MatrixXd block = xa.transpose() * w.asDiagonal() * xa /
                         static_cast<double>(n);
        if (a == b) block.topLeftCorner(p, p).diagonal().array() += ridge;
        h.block(a * q, b * q, q, q) = block;
        if (a != b) h.block(b * q, a * q, q, q) = block.transpose();
      }
    }
    return h;
  };
  const VectorXd theta =
      minimize(obj, VectorXd::Zero((k - 1) * q), cfg, trace);
  LinearModel m;
  m.task = Task::multiclass(k);
  m.weights = MatrixXd::Zero(k, p);
  m.bias = VectorXd::Zero(k);
  for (int j = 0; j + 1 < k; ++j) {
    m.weights.row(j) = theta.segment(j * q, p).transpose();
    m.bias(j) = theta(j * q + p);
  }
  return m;
}

LinearModel fit_linreg(const MatrixXd& x, const VectorXd& y,
                       const FitConfig& cfg) {
  cfg.validate();
  check_xy(x, y, "fit_linreg");
  if (x.rows() == 0) {
    throw Error(ErrorCode::EmptyInput, "fit_linreg: no samples");
  }
  const Index p = x.cols();
  const VectorXd x_mean = x.colwise().mean().transpose();
  const double y_mean = y.mean();
  const MatrixXd xc = x.rowwise() - x_mean.transpose();
  const VectorXd yc = y.array() - y_mean;
  MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += cfg.ridge;
  const VectorXd rhs = xc.transpose() * yc;
  VectorXd w;
  Eigen::LDLT<MatrixXd> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    w = ldlt.solve(rhs);
  }
  if (w.size() != p || !w.allFinite()) {
    w = gram.completeOrthogonalDecomposition().solve(rhs);
  }
  LinearModel m;
  m.task = Task::regression();
  m.weights = w.transpose();
  m.bias = VectorXd::Constant(1, y_mean - x_mean.dot(w));
  return m;
}

LinearModel fit_erm(const MatrixXd& x, const VectorXd& y, const Task& task,
                    const FitConfig& cfg, FitTrace* trace) {
  switch (task.kind) {
    case TaskKind::Binary: return fit_logistic(x, y, cfg, trace);
    case TaskKind::Multiclass: return fit_softmax(x, y, task.classes, cfg, trace);
    case TaskKind::Regression: return fit_linreg(x, y, cfg);
  }
  throw Error(ErrorCode::InvalidParameter, "unknown task kind");
}

LinearModel compose_latent(const MatrixXd& r, const MatrixXd& latent_weights,
                           const VectorXd& bias, const Task& task) {
  if (r.rows() != r.cols() || latent_weights.cols() > r.cols()) {
    throw Error(ErrorCode::DimensionMismatch,
                "compose_latent: incompatible mixing matrix");
  }
  const Index d_c = latent_weights.cols();
  const Eigen::PartialPivLU<MatrixXd> lu(r);
  const MatrixXd r_inv = lu.inverse();
  return LinearModel{task, latent_weights * r_inv.topRows(d_c), bias};
}

LinearModel gaussian_binary_oracle(const MatrixXd& r, const VectorXd& mu_c,
                                   double sigma_c, double eta) {
  if (!(sigma_c > 0.0) || !(eta > 0.0 && eta < 1.0)) {
    throw Error(ErrorCode::InvalidParameter,
                "oracle needs sigma_c > 0 and eta in (0, 1)");
  }
  const MatrixXd w = (2.0 / (sigma_c * sigma_c)) * mu_c.transpose();
  return compose_latent(r, w, VectorXd::Constant(1, std::log(eta / (1.0 - eta))),
                        Task::binary());
}

LinearModel gaussian_multiclass_oracle(const MatrixXd& r,
                                       const MatrixXd& class_means,
                                       double sigma_c) {
  if (!(sigma_c > 0.0)) {
    throw Error(ErrorCode::InvalidParameter, "oracle needs sigma_c > 0");
  }
  const Index k = class_means.rows();
  const double inv_var = 1.0 / (sigma_c * sigma_c);
  const VectorXd last = class_means.row(k - 1).transpose();
  MatrixXd w(k, class_means.cols());
  VectorXd b(k);
  for (Index y = 0; y < k; ++y) {
    const VectorXd mu = class_means.row(y).transpose();
    w.row(y) = inv_var * (mu - last).transpose();
    b(y) = -0.5 * inv_var * (mu.squaredNorm() - last.squaredNorm());
  }
  return compose_latent(r, w, b, Task::multiclass(static_cast<int>(k)));
}

double classification_error(const LinearModel& model, const MatrixXd& x,
                            const VectorXd& y) {
  check_xy(x, y, "classification_error");
  if (x.rows() == 0) {
    throw Error(ErrorCode::EmptyInput, "classification_error: no samples");
  }
  const VectorXd pred = model.predict(x);
  Index wrong = 0;
  for (Index i = 0; i < y.size(); ++i) {
    const int truth = model.task.kind == TaskKind::Binary
                          ? (y(i) > 0 ? 1 : 0)
                          : label_of(y(i));
    if (label_of(pred(i)) != truth) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(y.size());
}

double mse(const LinearModel& model, const MatrixXd& x, const VectorXd& y) {
  check_xy(x, y, "mse");
  if (x.rows() == 0) throw Error(ErrorCode::EmptyInput, "mse: no samples");
  return (model.predict(x) - y).squaredNorm() / static_cast<double>(y.size());
}

double rmse(const LinearModel& model, const MatrixXd& x, const VectorXd& y) {
  return std::sqrt(mse(model, x, y));
}

double r_squared(const LinearModel& model, const MatrixXd& x,
                 const VectorXd& y) {
  check_xy(x, y, "r_squared");
  if (x.rows() == 0) {
    throw Error(ErrorCode::EmptyInput, "r_squared: no samples");
  }
  const double sse = (model.predict(x) - y).squaredNorm();
  const double sst = (y.array() - y.mean()).square().sum();
  if (!(sst > 0.0)) {
    throw Error(ErrorCode::DegenerateLabels, "r_squared: constant targets");
  }
  return 1.0 - sse / sst;
}

std::pair<double, GroupKey> worst_group(std::span<const GroupMetric> groups,
                                        Worst direction) {
  const GroupMetric* best = nullptr;
  for (const auto& g : groups) {
    if (g.count <= 0) continue;
    if (!best) {
      best = &g;
      continue;
    }
    const bool worse = direction == Worst::Lowest ? g.value < best->value
                                                  : g.value > best->value;
    if (worse || (g.value == best->value && g.key < best->key)) best = &g;
  }
  if (!best) {
    throw Error(ErrorCode::EmptyInput, "worst_group: every group is empty");
  }
  return {best->value, best->key};
}

}  // namespace isr
