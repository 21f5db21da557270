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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "prefscale/errors.hpp"
#include "prefscale/estimator.hpp"
#include "support.hpp"

using namespace prefscale;

namespace {

EstimatorDataset random_linear(Rng& rng, int n, int d, const Vector& w, double b) {
  Matrix x(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) x(i, k) = rng.normal(0.0, 1.0);
    y[i] = x.row(i).dot(w) + b;
  }
  return make_dataset(x, y, false);
}

// Oracle-scaled records over runner segments of varied speed.
std::vector<PreferenceRecord> runner_records(std::uint64_t seed, int count) {
  const auto segs = testing::runner_segments(seed, 60, 25);
  Rng rng(seed, StreamId::kQuerySelection);
  ScalingContext ctx;
  std::vector<PreferenceRecord> out;
  for (int i = 0; i < count; ++i) {
    auto [a, b] = sample_pair_indices(segs.size(), rng);
    PreferenceRecord r{segs[a], segs[b]};
    ctx = update_context(ctx, r.left.true_return, r.right.true_return);
    r.z_hat = scale_preference(ctx, r.left.true_return, r.right.true_return);
    out.push_back(std::move(r));
  }
  return out;
}

SvrModel constant_svr(double bias, int dim) {
  SvrModel m;
  m.bias = bias;
  m.feature_mean = Vector::Zero(dim);
  m.feature_scale = Vector::Ones(dim);
  m.support_vectors = Matrix(0, dim);
  return m;
}

}  // namespace

TEST_CASE("split sizes and partition") {
  Rng rng(1, StreamId::kEstimatorSplit);
  const auto data = random_linear(rng, 10, 2, Vector::Ones(2), 0.0);
  Rng split_rng(2, StreamId::kEstimatorSplit);
  auto [train, test] = split_dataset(data, 0.7, split_rng);
  CHECK(train.rows() == 7);
  CHECK(test.rows() == 3);
  std::vector<double> all, parts;
  for (auto v : data.labels) all.push_back(v);
  for (auto v : train.labels) parts.push_back(v);
  for (auto v : test.labels) parts.push_back(v);
  std::sort(all.begin(), all.end());
  std::sort(parts.begin(), parts.end());
  CHECK(all == parts);

  Rng again(2, StreamId::kEstimatorSplit);
  auto [train2, test2] = split_dataset(data, 0.7, again);
  CHECK(train2.labels == train.labels);

  Rng half(3, StreamId::kEstimatorSplit);
  CHECK(split_dataset(data, 0.5, half).first.rows() == 5);
  const auto tiny = random_linear(rng, 9, 2, Vector::Ones(2), 0.0);
  CHECK_THROWS_AS(split_dataset(tiny, 0.7, half), ConfigError);
}

TEST_CASE("augmentation keeps swapped twins together") {
  const auto records = runner_records(4, 40);
  const auto data = make_dataset(records, true);
  CHECK(data.rows() == 80);
  CHECK(data.num_groups() == 40);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto r = static_cast<Eigen::Index>(2 * i);
    CHECK(data.labels[r + 1] == 1.0 - data.labels[r]);
    CHECK(swap_pair_features(data.features.row(r).transpose()) ==
          data.features.row(r + 1).transpose());
  }
  Rng rng(5, StreamId::kEstimatorSplit);
  auto [train, test] = split_dataset(data, 0.7, rng);
  CHECK(train.rows() == 56);
  for (auto g : train.groups) {
    CHECK(std::find(test.groups.begin(), test.groups.end(), g) == test.groups.end());
  }
}

TEST_CASE("OLS recovers exact linear labels") {
  Rng rng(6, StreamId::kEstimatorSplit);
  const Vector w{{0.3, -0.2, 0.05, 0.1}};
  const auto data = random_linear(rng, 80, 4, w, 0.5);
  const auto m = fit_ols(data);
  CHECK((m.weights - w).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(m.intercept - 0.5) < 1e-6);
}

TEST_CASE("OLS constant labels and residual orthogonality") {
  Rng rng(7, StreamId::kEstimatorSplit);
  auto data = random_linear(rng, 50, 3, Vector::Zero(3), 0.5);
  auto m = fit_ols(data);
  CHECK(m.weights.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(m.intercept == doctest::Approx(0.5).epsilon(1e-12));

  for (int i = 0; i < 50; ++i) data.labels[i] = rng.uniform(0.0, 1.0);
  m = fit_ols(data);
  Vector residual(50);
  for (int i = 0; i < 50; ++i) {
    residual[i] = data.labels[i] - predict_raw(m, data.features.row(i).transpose());
  }
  CHECK((data.features.transpose() * residual).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(std::abs(residual.sum()) < 1e-9);
}

TEST_CASE("OLS is unchanged by duplicating every row") {
  Rng rng(8, StreamId::kEstimatorSplit);
  auto data = random_linear(rng, 30, 2, Vector::Ones(2), 0.0);
  for (int i = 0; i < 30; ++i) data.labels[i] += rng.normal(0.0, 0.1);
  Matrix x2(60, 2);
  Vector y2(60);
  x2 << data.features, data.features;
  y2 << data.labels, data.labels;
  const auto a = fit_ols(data);
  const auto b = fit_ols(make_dataset(x2, y2, false));
  CHECK((a.weights - b.weights).norm() < 1e-9);
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-9));
}

TEST_CASE("SVR fits constant labels inside the tube") {
  Rng rng(9, StreamId::kEstimatorSplit);
  auto data = random_linear(rng, 40, 3, Vector::Zero(3), 0.3);
  const auto m = fit_svr(data);
  CHECK(m.converged);
  for (int i = 0; i < 40; ++i) {
    CHECK(std::abs(predict(m, data.features.row(i).transpose()) - 0.3) <= 0.01 + 1e-9);
  }
}

TEST_CASE("SVR single point") {
  Matrix x(1, 2);
  x << 0.4, -1.0;
  const auto m = fit_svr(make_dataset(x, Vector::Constant(1, 0.8), false));
  CHECK(std::abs(predict(m, x.row(0).transpose()) - 0.8) <= 0.01 + 1e-9);
}

TEST_CASE("SVR beats OLS on a smooth nonlinear target") {
  Rng rng(10, StreamId::kEstimatorSplit);
  const int n = 50;
  Matrix x(n, 1);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.uniform(-2.0, 2.0);
    y[i] = 0.5 + 0.4 * std::sin(2.0 * x(i, 0));
  }
  const auto data = make_dataset(x, y, false);
  Rng split(11, StreamId::kEstimatorSplit);
  auto [train, test] = split_dataset(data, 0.7, split);
  const auto ols = fit_ols(train);
  const auto svr = fit_svr(train);
  const double ols_mse = evaluate_mse(ols, test).mean;
  const double svr_mse = evaluate_mse(svr, test).mean;
  CHECK(svr_mse < ols_mse);
  CHECK(model_name(select_best(ols, svr, test)) == std::string("svr"));
}

TEST_CASE("SVR solution satisfies the KKT conditions") {
  const auto data = make_dataset(runner_records(12, 150), true);
  SvrConfig config;
  const auto m = fit_svr(data, config);
  REQUIRE(m.converged);
  CHECK(m.final_gap < config.tolerance);
  const double slack = 2.0 * config.tolerance;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.rows()); ++i) {
    const Vector x = data.features.row(i).transpose();
    const Vector xs = ((x - m.feature_mean).array() / m.feature_scale.array()).matrix();
    double coef = 0.0;
    for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s) {
      if (m.support_vectors.row(s).transpose() == xs) coef += m.coefficients[s];
    }
    const double residual = data.labels[i] - predict_raw(m, x);
    if (coef == 0.0) {
      CHECK(std::abs(residual) <= config.epsilon + slack);
    } else if (std::abs(coef) < config.c - 1e-9) {
      CHECK(std::abs(std::abs(residual) - config.epsilon) <= slack);
      CHECK(residual * coef > 0.0);
    } else {
      CHECK(std::abs(residual) >= config.epsilon - slack);
    }
  }
}

TEST_CASE("augmented SVR is swap consistent") {
  const auto data = make_dataset(runner_records(13, 200), true);
  const auto m = fit_svr(data);
  double total = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(data.rows()); ++i) {
    const Vector x = data.features.row(i).transpose();
    total += std::abs(predict(m, swap_pair_features(x)) - (1.0 - predict(m, x)));
  }
  CHECK(total / static_cast<double>(data.rows()) <= 0.05);
}

TEST_CASE("predictions are clamped") {
  OlsModel m{Vector::Zero(2), 0.5};
  CHECK(predict(m, Vector::Ones(2)) == 0.5);
  m.intercept = 1.3;
  CHECK(predict_raw(m, Vector::Ones(2)) == 1.3);
  CHECK(predict(m, Vector::Ones(2)) == 1.0);
  m.intercept = -0.4;
  CHECK(predict(EstimatorModel{m}, Vector::Ones(2)) == 0.0);
}

TEST_CASE("MSE arithmetic") {
  const Vector labels{{0.2, 0.4, 0.9}};
  const auto perfect = mse_of({0.2, 0.4, 0.9}, labels);
  CHECK(perfect.mean == 0.0);
  CHECK(perfect.std == 0.0);
  const auto off = mse_of({0.3, 0.5, 0.8}, labels);
  CHECK(off.mean == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(off.std == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("select_best picks the smaller MSE and breaks ties for SVR") {
  Matrix x = Matrix::Zero(4, 2);
  const auto test = make_dataset(x, Vector::Constant(4, 0.6), false);
  const OlsModel ols_far{Vector::Zero(2), 0.5};      // MSE 0.01
  const OlsModel ols_exact{Vector::Zero(2), 0.6};    // MSE 0
  CHECK(model_name(select_best(ols_far, constant_svr(0.6, 2), test)) == std::string("svr"));
  CHECK(model_name(select_best(ols_exact, constant_svr(0.5, 2), test)) == std::string("ols"));
  CHECK(model_name(select_best(ols_exact, constant_svr(0.6, 2), test)) == std::string("svr"));
}

TEST_CASE("estimator on oracle-scaled runner records") {
  const auto records = runner_records(14, 500);
  Rng rng(15, StreamId::kEstimatorSplit);
  const auto trained = train_estimator(records, 0.7, SvrConfig{}, rng);
  CHECK(trained.svr_mse.mean <= 0.05);
  CHECK(trained.held_out_mse == std::min(trained.svr_mse.mean, trained.ols_mse.mean));
}
