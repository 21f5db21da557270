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

#ifndef PREFSCALE_REWARD_MODEL_HPP_
#define PREFSCALE_REWARD_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "prefscale/numerics.hpp"
#include "prefscale/oracle.hpp"
#include "prefscale/trajectory.hpp"

namespace prefscale {

struct RewardModelConfig {
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::kTanh;
  double learning_rate = 1e-4;
  double l2 = 1e-4;
  int epochs = 10;
  int minibatch = 64;
  int norm_warmup = 100;
};

// Latent per-step reward r(o, a): an MLP on concat(observation, action).
struct RewardPredictor {
  int obs_dim = 0;
  int act_dim = 0;
  MlpParams net;
  AdamState optimizer;
  RunningStats output_norm;
  int norm_warmup = 100;
};

RewardPredictor make_reward_predictor(int obs_dim, int act_dim,
                                      const RewardModelConfig& config,
                                      Rng& rng);

double predict_reward(const RewardPredictor& model, const Vector& observation,
                      const Vector& action);
// Raw per-step predictions for every transition, in order.
Vector predict_segment(const RewardPredictor& model, const Segment& segment);
double predicted_segment_return(const RewardPredictor& model,
                                const Segment& segment);

// P[left > right] = exp(a) / (exp(a) + exp(b)) for segment sums a, b,
// evaluated as a logistic of a - b. pair_probability(a, b) and
// pair_probability(b, a) sum to exactly 1.
double pair_probability(double sum_left, double sum_right);

struct PreferenceTriple {
  double left_return = 0.0;
  double right_return = 0.0;
  double z_hat = 0.5;
};
using PreferenceBatch = std::vector<PreferenceTriple>;

// Mean soft-label cross-entropy:
//   -[z log P(l > r) + (1 - z) log P(r > l)]
// computed through softplus so large sums do not overflow.
double preference_loss(const PreferenceBatch& batch);
// d loss / d left_return for each triple; d/d right_return is the negative.
std::vector<double> preference_loss_grad(const PreferenceBatch& batch);
// Binary entropy of z: the minimum of the per-pair loss.
double binary_entropy(double z);

struct LossAndGrad {
  double loss = 0.0;
  MlpParams grad;
};

// Preference loss of the network over `records`, plus 0.5 * l2 * |W|^2 on
// weight matrices, with its gradient.
LossAndGrad preference_objective(const MlpParams& net,
                                 const std::vector<const PreferenceRecord*>& records,
                                 double l2);

struct FitReport {
  std::vector<double> epoch_mean_loss;
  bool aborted = false;
};

// Minibatch Adam over shuffled copies of `database`. Throws RuntimeError on a
// non-finite loss.
FitReport fit(RewardPredictor& model,
              const std::vector<PreferenceRecord>& database, int epochs,
              int minibatch, double l2, Rng& rng);

// (raw - running mean) / running std once `norm_warmup` predictions were
// observed; before that the raw value is returned and `warming_up` is set.
struct NormalizedReward {
  double value = 0.0;
  bool warming_up = false;
};
NormalizedReward normalized_reward(const RewardPredictor& model,
                                   const Vector& observation,
                                   const Vector& action);
NormalizedReward normalize_prediction(const RewardPredictor& model, double raw);
void observe_prediction(RewardPredictor& model, double raw);

}  // namespace prefscale

#endif  // PREFSCALE_REWARD_MODEL_HPP_
