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

#ifndef PREFSCALE_POLICY_HPP_
#define PREFSCALE_POLICY_HPP_

#include <utility>
#include <vector>

#include "prefscale/numerics.hpp"

namespace prefscale {

struct PolicyConfig {
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::kTanh;
  double learning_rate = 3e-4;
  int horizon = 2048;
  int minibatch = 64;
  int epochs = 10;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double log_std_init = 0.0;
  // An epoch stops early once the minibatch mean |log ratio| exceeds this.
  double max_mean_abs_log_ratio = 1.0;
};

// Diagonal Gaussian actor with a state-independent log std, plus a critic.
struct PolicyParams {
  MlpParams actor;
  Vector log_std;
  MlpParams critic;

  int obs_dim() const { return actor.input_dim(); }
  int act_dim() const { return actor.output_dim(); }

  // actor values, log_std, critic values.
  Vector flatten() const;
  void assign(const Vector& flat);
  std::size_t size() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

struct Policy {
  PolicyParams params;
  AdamState actor_opt;
  AdamState log_std_opt;
  AdamState critic_opt;
};

Policy make_policy(int obs_dim, int act_dim, const PolicyConfig& config,
                   Rng& rng);

struct ActResult {
  Vector action;  // unclamped sample
  double log_prob = 0.0;
  double value = 0.0;
};

ActResult act(const PolicyParams& policy, const Vector& observation, Rng& rng);
Vector mean_action(const PolicyParams& policy, const Vector& observation);
double state_value(const PolicyParams& policy, const Vector& observation);
double gaussian_log_prob(const Vector& action, const Vector& mean,
                         const Vector& log_std);

struct RolloutBuffer {
  std::vector<Vector> observations;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> log_probs;
  std::vector<bool> dones;
  // Critic value of the state after the last stored step; ignored when the
  // last step ended an episode.
  double bootstrap_value = 0.0;

  std::size_t size() const { return rewards.size(); }
  void clear();
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t,
// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, returns = A + V.
// `values` has one more entry than `rewards`: the bootstrap value.
Advantages gae_advantages(const std::vector<double>& rewards,
                          const std::vector<double>& values,
                          const std::vector<bool>& dones, double gamma,
                          double lambda);
Advantages gae_advantages(const RolloutBuffer& buffer, double gamma,
                          double lambda);

// Shifts and scales to mean 0, population std 1.
std::vector<double> normalize_advantages(const std::vector<double>& adv);

// A minibatch in column layout.
struct PpoBatch {
  Matrix observations;  // obs_dim x B
  Matrix actions;       // act_dim x B
  Vector old_log_probs;
  Vector advantages;
  Vector returns;
};

struct PpoLossTerms {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate (to be maximized)
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_abs_log_ratio = 0.0;
  double approx_kl = 0.0;  // mean(old log prob - new log prob)
  double clip_fraction = 0.0;
};

struct PpoGrad {
  MlpParams actor;
  Vector log_std;
  MlpParams critic;
  Vector flatten() const;
};

// loss = -surrogate + value_coef * mean((V - R)^2) - entropy_coef * entropy.
PpoLossTerms ppo_objective(const PolicyParams& policy, const PpoBatch& batch,
                           const PolicyConfig& config, PpoGrad* grad);

struct PpoStats {
  double approx_kl = 0.0;
  double entropy = 0.0;
  double surrogate = 0.0;
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
};

PpoStats ppo_update(Policy& policy, const RolloutBuffer& buffer,
                    const PolicyConfig& config, Rng& rng);

}  // namespace prefscale

#endif  // PREFSCALE_POLICY_HPP_
