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

#ifndef PREFSCALE_ESTIMATOR_HPP_
#define PREFSCALE_ESTIMATOR_HPP_

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "prefscale/numerics.hpp"
#include "prefscale/oracle.hpp"

namespace prefscale {

// Regression from pair features to preference labels, used to answer a share
// of the queries in place of the labeller.

struct EstimatorDataset {
  Matrix features;  // one row per example
  Vector labels;
  // Rows sharing a group id are one pair and its swapped twin; splits never
  // separate them.
  std::vector<std::int64_t> groups;
  bool augmented = false;

  std::size_t rows() const { return static_cast<std::size_t>(labels.size()); }
  std::size_t num_groups() const;
};

// One row per record; with `augment`, each record also contributes the
// swapped pair labelled 1 - z.
EstimatorDataset make_dataset(const std::vector<PreferenceRecord>& records,
                              bool augment);
EstimatorDataset make_dataset(const Matrix& features, const Vector& labels,
                              bool augment);

// Shuffles the pair groups with `rng` and puts floor(f * groups) of them in
// the training part. Needs at least 10 groups.
std::pair<EstimatorDataset, EstimatorDataset> split_dataset(
    const EstimatorDataset& data, double train_fraction, Rng& rng);

struct OlsModel {
  Vector weights;
  double intercept = 0.0;
};

// Least squares with an intercept, solved through the normal equations with a
// 1e-8 ridge on the weights.
OlsModel fit_ols(const EstimatorDataset& train, double ridge = 1e-8);

struct SvrConfig {
  double c = 1.0;
  double epsilon = 0.01;
  // <= 0 selects 1 / (dim * variance of the standardized features).
  double gamma = 0.0;
  double tolerance = 1e-3;
  std::int64_t max_sweeps = 10000;
};

// epsilon-insensitive support-vector regression with an RBF kernel.
// Features are standardized per column with the training statistics.
struct SvrModel {
  Vector coefficients;  // alpha_i - alpha*_i, per support vector
  Matrix support_vectors;  // standardized, one row each
  double bias = 0.0;
  double gamma = 0.0;
  double c = 1.0;
  double epsilon = 0.01;
  Vector feature_mean;
  Vector feature_scale;
  bool converged = false;
  std::int64_t iterations = 0;
  double final_gap = 0.0;
};

SvrModel fit_svr(const EstimatorDataset& train, const SvrConfig& config = {});

using EstimatorModel = std::variant<OlsModel, SvrModel>;

double predict_raw(const OlsModel& model, const Vector& x);
double predict_raw(const SvrModel& model, const Vector& x);
// Raw output clamped to [0, 1].
double predict(const EstimatorModel& model, const Vector& x);
double predict(const OlsModel& model, const Vector& x);
double predict(const SvrModel& model, const Vector& x);

struct MseReport {
  double mean = 0.0;
  double std = 0.0;  // population std of the squared errors
};

MseReport evaluate_mse(const EstimatorModel& model,
                       const EstimatorDataset& test);
MseReport mse_of(const std::vector<double>& predictions, const Vector& labels);

// The model with the strictly smaller mean MSE; ties go to the SVR.
EstimatorModel select_best(const OlsModel& ols, const SvrModel& svr,
                           const EstimatorDataset& test);
const char* model_name(const EstimatorModel& model);

// Everything a run needs: fit both on a split, keep the better one and its
// held-out MSE.
struct TrainedEstimator {
  EstimatorModel model;
  MseReport ols_mse;
  MseReport svr_mse;
  double held_out_mse = 0.0;
  std::size_t train_rows = 0;
};

TrainedEstimator train_estimator(const std::vector<PreferenceRecord>& records,
                                 double train_fraction, const SvrConfig& svr,
                                 Rng& rng);

}  // namespace prefscale

#endif  // PREFSCALE_ESTIMATOR_HPP_
