// Copyright 2026 The prefscale Authors.
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

#include "prefscale/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>

#include "prefscale/errors.hpp"
#include "prefscale/trajectory.hpp"

namespace prefscale {

std::size_t EstimatorDataset::num_groups() const {
  return std::set<std::int64_t>(groups.begin(), groups.end()).size();
}

EstimatorDataset make_dataset(const Matrix& features, const Vector& labels,
                              bool augment) {
  if (features.rows() != labels.size()) {
    throw ConfigError("feature and label counts differ");
  }
  EstimatorDataset out;
  out.augmented = augment;
  const Eigen::Index n = features.rows();
  const Eigen::Index rows = augment ? 2 * n : n;
  out.features.resize(rows, features.cols());
  out.labels.resize(rows);
  out.groups.resize(static_cast<std::size_t>(rows));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index r = augment ? 2 * i : i;
    out.features.row(r) = features.row(i);
    out.labels[r] = labels[i];
    out.groups[static_cast<std::size_t>(r)] = i;
    if (augment) {
      out.features.row(r + 1) =
          swap_pair_features(features.row(i).transpose()).transpose();
      out.labels[r + 1] = 1.0 - labels[i];
      out.groups[static_cast<std::size_t>(r + 1)] = i;
    }
  }
  return out;
}

EstimatorDataset make_dataset(const std::vector<PreferenceRecord>& records,
                              bool augment) {
  if (records.empty()) throw ConfigError("no preference records");
  const Vector first = featurize_pair(records[0].left, records[0].right);
  Matrix features(static_cast<Eigen::Index>(records.size()), first.size());
  Vector labels(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    features.row(row) =
        featurize_pair(records[i].left, records[i].right).transpose();
    labels[row] = records[i].z_hat;
  }
  return make_dataset(features, labels, augment);
}

namespace {

EstimatorDataset take_groups(const EstimatorDataset& data,
                             const std::set<std::int64_t>& keep) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < data.groups.size(); ++i) {
    if (keep.count(data.groups[i]) != 0) rows.push_back(static_cast<Eigen::Index>(i));
  }
  EstimatorDataset out;
  out.augmented = data.augmented;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    out.features.row(r) = data.features.row(rows[k]);
    out.labels[r] = data.labels[rows[k]];
    out.groups.push_back(data.groups[static_cast<std::size_t>(rows[k])]);
  }
  return out;
}

}  // namespace

std::pair<EstimatorDataset, EstimatorDataset> split_dataset(
    const EstimatorDataset& data, double train_fraction, Rng& rng) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  // Distinct group ids in first-appearance order.
  std::vector<std::int64_t> ids;
  std::set<std::int64_t> seen;
  for (auto g : data.groups) {
    if (seen.insert(g).second) ids.push_back(g);
  }
  if (ids.size() < 10) {
    throw ConfigError("need at least 10 examples to split, have " +
                      std::to_string(ids.size()));
  }
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(ids.size())));
  const std::set<std::int64_t> train_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::set<std::int64_t> test_ids(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return {take_groups(data, train_ids), take_groups(data, test_ids)};
}

// ---------------------------------------------------------------------------

OlsModel fit_ols(const EstimatorDataset& train, double ridge) {
  if (train.rows() == 0) throw ConfigError("fit_ols: empty training set");
  const Matrix& x = train.features;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Matrix xc = x.rowwise() - mean;
  const double y_mean = train.labels.mean();
  const Vector yc = train.labels.array() - y_mean;

  // The intercept is not penalized: centering removes it from the system.
  Matrix gram = xc.transpose() * xc;
  gram.diagonal().array() += ridge;
  OlsModel model;
  model.weights = gram.ldlt().solve(xc.transpose() * yc);
  if (!model.weights.allFinite()) {
    throw RuntimeError("fit_ols: singular normal equations");
  }
  model.intercept = y_mean - mean.dot(model.weights);
  return model;
}

// ---------------------------------------------------------------------------

namespace {

// SMO for the epsilon-SVR dual over 2n variables: beta = [alpha; alpha*],
//   min 1/2 beta' Q beta + p' beta,  y' beta = 0,  0 <= beta <= C,
// with y = [+1..; -1..], Q_ij = y_i y_j K(i mod n, j mod n),
// p = [eps - z; eps + z]. Working pairs use second-order selection.
class SvrSolver {
 public:
  SvrSolver(const Matrix& kernel, const Vector& targets, double c, double eps)
      : k_(kernel), n_(targets.size()), c_(c) {
    const Eigen::Index m = 2 * n_;
    alpha_ = Vector::Zero(m);
    grad_ = Vector(m);
    sign_ = Vector(m);
    for (Eigen::Index i = 0; i < n_; ++i) {
      grad_[i] = eps - targets[i];
      grad_[i + n_] = eps + targets[i];
      sign_[i] = 1.0;
      sign_[i + n_] = -1.0;
    }
  }

  // Returns the final violation gap.
  double solve(double tolerance, std::int64_t max_iterations,
               std::int64_t* iterations) {
    double gap = std::numeric_limits<double>::infinity();
    std::int64_t it = 0;
    for (; it < max_iterations; ++it) {
      Eigen::Index i = -1;
      Eigen::Index j = -1;
      gap = select_pair(i, j);
      if (gap < tolerance || j < 0) break;
      update_pair(i, j);
    }
    if (it == max_iterations) {
      Eigen::Index i = -1;
      Eigen::Index j = -1;
      gap = select_pair(i, j);
    }
    *iterations = it;
    return gap;
  }

  double rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      const double yg = sign_[t] * grad_[t];
      if (alpha_[t] >= c_) {
        if (sign_[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else if (alpha_[t] <= 0.0) {
        if (sign_[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
      } else {
        ++n_free;
        sum_free += yg;
      }
    }
    return n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  }

  Vector coefficients() const {
    return alpha_.head(n_) - alpha_.tail(n_);
  }

 private:
  double kernel(Eigen::Index a, Eigen::Index b) const {
    return k_(a % n_, b % n_);
  }
  double q(Eigen::Index a, Eigen::Index b) const {
    return sign_[a] * sign_[b] * kernel(a, b);
  }
  bool below_upper(Eigen::Index t) const { return alpha_[t] < c_; }
  bool above_lower(Eigen::Index t) const { return alpha_[t] > 0.0; }

  double select_pair(Eigen::Index& out_i, Eigen::Index& out_j) const {
    constexpr double kTau = 1e-12;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      if (sign_[t] > 0) {
        if (below_upper(t) && -grad_[t] >= gmax) { gmax = -grad_[t]; i = t; }
      } else {
        if (above_lower(t) && grad_[t] >= gmax) { gmax = grad_[t]; i = t; }
      }
    }
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      double grad_diff = 0.0;
      if (sign_[t] > 0) {
        if (!above_lower(t)) continue;
        gmax2 = std::max(gmax2, grad_[t]);
        grad_diff = gmax + grad_[t];
      } else {
        if (!below_upper(t)) continue;
        gmax2 = std::max(gmax2, -grad_[t]);
        grad_diff = gmax - grad_[t];
      }
      if (grad_diff > 0.0 && i >= 0) {
        double quad = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best) { best = obj; j = t; }
      }
    }
    out_i = i;
    out_j = j;
    return gmax + gmax2;
  }

  void update_pair(Eigen::Index i, Eigen::Index j) {
    constexpr double kTau = 1e-12;
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
    if (quad <= 0.0) quad = kTau;
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (sign_[i] != sign_[j]) {
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > c_) { ai = c_; aj = c_ - diff; }
      } else {
        if (aj > c_) { aj = c_; ai = c_ + diff; }
      }
    } else {
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c_) {
        if (ai > c_) { ai = c_; aj = sum - c_; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > c_) {
        if (aj > c_) { aj = c_; ai = sum - c_; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    const double di = ai - old_i;
    const double dj = aj - old_j;
    for (Eigen::Index t = 0; t < 2 * n_; ++t) {
      grad_[t] += q(t, i) * di + q(t, j) * dj;
    }
  }

  const Matrix& k_;
  Eigen::Index n_;
  double c_;
  Vector alpha_;
  Vector grad_;
  Vector sign_;
};

Matrix rbf_kernel(const Matrix& x, double gamma) {
  const Vector sq = x.rowwise().squaredNorm();
  Matrix d2 = (-2.0 * x * x.transpose()).colwise() + sq;
  d2.rowwise() += sq.transpose();
  return (-gamma * d2.array().max(0.0)).exp().matrix();
}

}  // namespace

SvrModel fit_svr(const EstimatorDataset& train, const SvrConfig& config) {
  const Eigen::Index n = train.features.rows();
  if (n < 1) throw ConfigError("fit_svr: empty training set");
  if (!(config.c > 0.0) || config.epsilon < 0.0) {
    throw ConfigError("fit_svr: C must be positive and epsilon non-negative");
  }
  SvrModel model;
  model.c = config.c;
  model.epsilon = config.epsilon;
  model.feature_mean = train.features.colwise().mean().transpose();
  const Matrix centered = train.features.rowwise() - model.feature_mean.transpose();
  model.feature_scale =
      (centered.array().square().colwise().sum() / static_cast<double>(n))
          .sqrt()
          .transpose();
  for (Eigen::Index k = 0; k < model.feature_scale.size(); ++k) {
    if (!(model.feature_scale[k] > 1e-12)) model.feature_scale[k] = 1.0;
  }
  const Matrix x =
      (centered.array().rowwise() / model.feature_scale.transpose().array())
          .matrix();

  if (config.gamma > 0.0) {
    model.gamma = config.gamma;
  } else {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    const double d = static_cast<double>(x.cols());
    model.gamma = var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
  }

  const Matrix kernel = rbf_kernel(x, model.gamma);
  SvrSolver solver(kernel, train.labels, config.c, config.epsilon);
  const std::int64_t max_iterations =
      config.max_sweeps * std::max<std::int64_t>(1, n);
  model.final_gap = solver.solve(config.tolerance, max_iterations, &model.iterations);
  model.converged = model.final_gap < config.tolerance;
  model.bias = -solver.rho();

  const Vector coef = solver.coefficients();
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (coef[i] != 0.0) support.push_back(i);
  }
  model.coefficients.resize(static_cast<Eigen::Index>(support.size()));
  model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), x.cols());
  for (std::size_t s = 0; s < support.size(); ++s) {
    const auto r = static_cast<Eigen::Index>(s);
    model.coefficients[r] = coef[support[s]];
    model.support_vectors.row(r) = x.row(support[s]);
  }
  return model;
}

// ---------------------------------------------------------------------------

double predict_raw(const OlsModel& model, const Vector& x) {
  if (x.size() != model.weights.size()) {
    throw ConfigError("estimator feature dimension mismatch");
  }
  return model.weights.dot(x) + model.intercept;
}

double predict_raw(const SvrModel& model, const Vector& x) {
  if (x.size() != model.feature_mean.size()) {
    throw ConfigError("estimator feature dimension mismatch");
  }
  const Vector xs =
      ((x - model.feature_mean).array() / model.feature_scale.array()).matrix();
  double out = model.bias;
  for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
    const double d2 = (model.support_vectors.row(s).transpose() - xs).squaredNorm();
    out += model.coefficients[s] * std::exp(-model.gamma * d2);
  }
  return out;
}

double predict(const OlsModel& model, const Vector& x) {
  return std::clamp(predict_raw(model, x), 0.0, 1.0);
}

double predict(const SvrModel& model, const Vector& x) {
  return std::clamp(predict_raw(model, x), 0.0, 1.0);
}

double predict(const EstimatorModel& model, const Vector& x) {
  return std::visit([&x](const auto& m) { return predict(m, x); }, model);
}

MseReport mse_of(const std::vector<double>& predictions, const Vector& labels) {
  if (predictions.empty() ||
      predictions.size() != static_cast<std::size_t>(labels.size())) {
    throw ConfigError("evaluate_mse: empty or mismatched test set");
  }
  Vector sq(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double e = predictions[static_cast<std::size_t>(i)] - labels[i];
    sq[i] = e * e;
  }
  MseReport report;
  report.mean = sq.mean();
  report.std = std::sqrt((sq.array() - report.mean).square().mean());
  return report;
}

MseReport evaluate_mse(const EstimatorModel& model,
                       const EstimatorDataset& test) {
  std::vector<double> predictions;
  predictions.reserve(test.rows());
  for (Eigen::Index i = 0; i < test.features.rows(); ++i) {
    predictions.push_back(predict(model, test.features.row(i).transpose()));
  }
  return mse_of(predictions, test.labels);
}

EstimatorModel select_best(const OlsModel& ols, const SvrModel& svr,
                           const EstimatorDataset& test) {
  const double ols_mse = evaluate_mse(ols, test).mean;
  const double svr_mse = evaluate_mse(svr, test).mean;
  if (ols_mse < svr_mse) return ols;
  return svr;
}

const char* model_name(const EstimatorModel& model) {
  return std::holds_alternative<OlsModel>(model) ? "ols" : "svr";
}

TrainedEstimator train_estimator(const std::vector<PreferenceRecord>& records,
                                 double train_fraction, const SvrConfig& svr,
                                 Rng& rng) {
  const EstimatorDataset data = make_dataset(records, /*augment=*/true);
  auto [train, test] = split_dataset(data, train_fraction, rng);
  const OlsModel ols = fit_ols(train);
  const SvrModel svr_model = fit_svr(train, svr);
  TrainedEstimator out;
  out.ols_mse = evaluate_mse(ols, test);
  out.svr_mse = evaluate_mse(svr_model, test);
  if (out.ols_mse.mean < out.svr_mse.mean) {
    out.model = ols;
    out.held_out_mse = out.ols_mse.mean;
  } else {
    out.model = svr_model;
    out.held_out_mse = out.svr_mse.mean;
  }
  out.train_rows = train.rows();
  return out;
}

}  // namespace prefscale
