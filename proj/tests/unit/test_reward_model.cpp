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
#include "prefscale/reward_model.hpp"
#include "support.hpp"

using namespace prefscale;
using prefscale::testing::random_segment;

namespace {

RewardModelConfig small_config() {
  RewardModelConfig c;
  c.hidden = {16, 16};
  return c;
}

// Records whose true per-step reward is w . observation, labelled by the
// scaling oracle.
std::vector<PreferenceRecord> linear_records(std::uint64_t seed, int count) {
  Rng rng(seed, StreamId::kEnvironment);
  const Vector w{{1.0, -0.5, 0.25}};
  ScalingContext ctx;
  std::vector<PreferenceRecord> out;
  auto make = [&] {
    Segment s = random_segment(rng, 3, 1, 10);
    // Shift each segment so returns spread out.
    const double shift = rng.normal(0.0, 1.0);
    for (auto& t : s.transitions) {
      t.observation.array() += shift;
      t.true_reward = w.dot(t.observation);
    }
    s.true_return = s.recompute_true_return();
    return s;
  };
  for (int i = 0; i < count; ++i) {
    PreferenceRecord r;
    r.left = make();
    r.right = make();
    ctx = update_context(ctx, r.left.true_return, r.right.true_return);
    r.z_hat = scale_preference(ctx, r.left.true_return, r.right.true_return);
    r.timestep = i;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("pair probability values") {
  CHECK(pair_probability(2.0, 2.0) == 0.5);
  CHECK(pair_probability(1.0, 0.0) ==
        doctest::Approx(std::exp(1.0) / (std::exp(1.0) + 1.0)).epsilon(1e-15));
  CHECK(pair_probability(1000.0, 0.0) == 1.0);
  CHECK(pair_probability(0.0, 1000.0) == 0.0);
  CHECK(std::isfinite(pair_probability(-1e308, 1e308)));
}

TEST_CASE("pair probability is antisymmetric and shift invariant") {
  Rng rng(1, StreamId::kRewardModel);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.normal(0.0, 20.0);
    const double b = rng.normal(0.0, 20.0);
    CHECK(pair_probability(a, b) == doctest::Approx(1.0 - pair_probability(b, a)).epsilon(1e-15));
    // Adding c per step to two length-L segments shifts both sums by c * L.
    const double shift = rng.uniform(-3.0, 3.0) * 25.0;
    CHECK(pair_probability(a + shift, b + shift) ==
          doctest::Approx(pair_probability(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("preference loss values") {
  CHECK(preference_loss({{1.0, 1.0, 0.5}}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double expected = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  CHECK(preference_loss({{std::log(3.0), 0.0, 0.75}}) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(expected == doctest::Approx(0.562335).epsilon(1e-6));
  CHECK(preference_loss({{500.0, 0.0, 1.0}}) < 1e-12);
  CHECK_THROWS(preference_loss({}));
}

TEST_CASE("preference loss is bounded below by the label entropy") {
  Rng rng(2, StreamId::kRewardModel);
  for (int i = 0; i < 500; ++i) {
    const double z = rng.uniform(0.0, 1.0);
    const double d = rng.normal(0.0, 3.0);
    CHECK(preference_loss({{d, 0.0, z}}) >= binary_entropy(z) - 1e-12);
  }
  // Equality at the matched probability.
  const double z = 0.3;
  const double d = std::log(z / (1.0 - z));
  CHECK(preference_loss({{d, 0.0, z}}) == doctest::Approx(binary_entropy(z)).epsilon(1e-12));
}

TEST_CASE("preference loss gradient with respect to the sums") {
  Rng rng(3, StreamId::kRewardModel);
  PreferenceBatch batch;
  for (int i = 0; i < 8; ++i) {
    batch.push_back({rng.normal(0.0, 2.0), rng.normal(0.0, 2.0), rng.uniform(0.0, 1.0)});
  }
  const auto g = preference_loss_grad(batch);
  const double h = 1e-6;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto up = batch, down = batch;
    up[i].left_return += h;
    down[i].left_return -= h;
    const double numeric = (preference_loss(up) - preference_loss(down)) / (2 * h);
    CHECK(g[i] == doctest::Approx(numeric).epsilon(1e-6));
  }
}

TEST_CASE("preference objective passes the finite-difference check") {
  Rng rng(4, StreamId::kRewardModel);
  for (int instance = 0; instance < 5; ++instance) {
    const MlpParams net = make_mlp(4, {8, 8}, 1, Activation::kTanh, rng);
    std::vector<PreferenceRecord> records(3);
    for (auto& r : records) {
      r.left = random_segment(rng, 3, 1, 6);
      r.right = random_segment(rng, 3, 1, 6);
      r.z_hat = rng.uniform(0.0, 1.0);
    }
    std::vector<const PreferenceRecord*> ptrs;
    for (const auto& r : records) ptrs.push_back(&r);
    const auto analytic = preference_objective(net, ptrs, 1e-4);
    auto loss_at = [&](const Vector& v) {
      MlpParams p = net;
      p.values() = v;
      return preference_objective(p, ptrs, 1e-4).loss;
    };
    const auto report = gradient_check(loss_at, net.values(), analytic.grad.values(), 1e-4);
    CHECK(report.pass);
    CHECK(report.max_rel_error <= 1e-4);
  }
}

TEST_CASE("untrained predictor outputs zero") {
  Rng rng(5, StreamId::kInit);
  const auto model = make_reward_predictor(3, 1, small_config(), rng);
  CHECK(predict_reward(model, Vector::Ones(3), Vector::Ones(1)) == 0.0);
  CHECK(model.net.input_dim() == 4);
  CHECK(model.net.output_dim() == 1);
}

TEST_CASE("normalization warmup and standardization") {
  Rng rng(6, StreamId::kInit);
  auto model = make_reward_predictor(1, 1, small_config(), rng);
  model.norm_warmup = 4;
  observe_prediction(model, 1.0);
  auto early = normalize_prediction(model, 7.0);
  CHECK(early.warming_up);
  CHECK(early.value == 7.0);
  for (int i = 0; i < 99; ++i) observe_prediction(model, i % 2 == 0 ? 3.0 : 1.0);
  // 50 ones and 50 threes: mean 2, population std 1.
  CHECK_FALSE(normalize_prediction(model, 3.0).warming_up);
  CHECK(normalize_prediction(model, 3.0).value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normalize_prediction(model, 1.0).value == doctest::Approx(-1.0).epsilon(1e-12));

  auto flat = make_reward_predictor(1, 1, small_config(), rng);
  flat.norm_warmup = 4;
  for (int i = 0; i < 10; ++i) observe_prediction(flat, 2.5);
  CHECK(normalize_prediction(flat, 2.5).value == 0.0);
}

TEST_CASE("normalization is invariant to an affine shift of the raw stream") {
  Rng rng(7, StreamId::kInit);
  auto a = make_reward_predictor(1, 1, small_config(), rng);
  auto b = a;
  Rng draws(8, StreamId::kRewardModel);
  std::vector<double> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(draws.normal(0.0, 2.0));
  for (double x : xs) {
    observe_prediction(a, x);
    observe_prediction(b, x + 40.0);
  }
  for (double x : xs) {
    CHECK(normalize_prediction(a, x).value ==
          doctest::Approx(normalize_prediction(b, x + 40.0).value).epsilon(1e-9));
  }
}

TEST_CASE("fit refuses a database smaller than the minibatch") {
  Rng rng(9, StreamId::kInit);
  auto model = make_reward_predictor(3, 1, small_config(), rng);
  const auto db = linear_records(1, 10);
  CHECK_THROWS_AS(fit(model, db, 1, 64, 1e-4, rng), ConfigError);
}

TEST_CASE("tied database stays at the irreducible entropy") {
  Rng rng(10, StreamId::kInit);
  auto model = make_reward_predictor(3, 1, small_config(), rng);
  Rng seg_rng(11, StreamId::kEnvironment);
  const Segment s = random_segment(seg_rng, 3, 1, 5);
  std::vector<PreferenceRecord> db(64, PreferenceRecord{s, s, 0.5});
  const auto report = fit(model, db, 5, 16, 0.0, rng);
  REQUIRE(report.epoch_mean_loss.size() == 5);
  for (double l : report.epoch_mean_loss) {
    CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
}

TEST_CASE("fit is deterministic under a fixed seed") {
  const auto db = linear_records(2, 128);
  auto run = [&] {
    Rng rng(12, StreamId::kInit);
    auto model = make_reward_predictor(3, 1, small_config(), rng);
    Rng fit_rng(12, StreamId::kRewardModel);
    fit(model, db, 2, 32, 1e-4, fit_rng);
    return model.net;
  };
  CHECK(run() == run());
}

TEST_CASE("reward model recovers a linear ordering") {
  auto config = small_config();
  config.learning_rate = 1e-3;
  Rng rng(13, StreamId::kInit);
  auto model = make_reward_predictor(3, 1, config, rng);
  const auto train = linear_records(3, 500);
  Rng fit_rng(13, StreamId::kRewardModel);
  const auto report = fit(model, train, 30, 64, 1e-4, fit_rng);
  CHECK_FALSE(report.aborted);
  CHECK(report.epoch_mean_loss.back() < report.epoch_mean_loss.front());

  const auto test = linear_records(4, 400);
  std::vector<double> gaps;
  for (const auto& r : test) gaps.push_back(std::abs(r.left.true_return - r.right.true_return));
  auto sorted = gaps;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  const double median = sorted[sorted.size() / 2];
  int agree = 0, total = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (gaps[i] <= median) continue;
    const double p = pair_probability(predicted_segment_return(model, test[i].left),
                                      predicted_segment_return(model, test[i].right));
    const bool truth = test[i].left.true_return > test[i].right.true_return;
    agree += (p > 0.5) == truth;
    ++total;
  }
  CHECK(static_cast<double>(agree) / total >= 0.9);
}
