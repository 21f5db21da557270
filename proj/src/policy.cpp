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

#include "prefscale/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "prefscale/errors.hpp"

namespace prefscale {
namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

Vector PolicyParams::flatten() const {
  Vector out(static_cast<Eigen::Index>(size()));
  out << actor.values(), log_std, critic.values();
  return out;
}

void PolicyParams::assign(const Vector& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) {
    throw ConfigError("policy parameter vector has the wrong size");
  }
  const auto na = static_cast<Eigen::Index>(actor.size());
  const auto ns = log_std.size();
  actor.values() = flat.head(na);
  log_std = flat.segment(na, ns);
  critic.values() = flat.tail(static_cast<Eigen::Index>(critic.size()));
}

std::size_t PolicyParams::size() const {
  return actor.size() + static_cast<std::size_t>(log_std.size()) +
         critic.size();
}

Vector PpoGrad::flatten() const {
  Vector out(static_cast<Eigen::Index>(actor.size() + critic.size()) +
             log_std.size());
  out << actor.values(), log_std, critic.values();
  return out;
}

Policy make_policy(int obs_dim, int act_dim, const PolicyConfig& config,
                   Rng& rng) {
  Policy policy;
  policy.params.actor =
      make_mlp(obs_dim, config.hidden, act_dim, config.activation, rng);
  policy.params.log_std = Vector::Constant(act_dim, config.log_std_init);
  policy.params.critic =
      make_mlp(obs_dim, config.hidden, 1, config.activation, rng);
  policy.actor_opt =
      AdamState::for_size(policy.params.actor.size(), config.learning_rate);
  policy.log_std_opt =
      AdamState::for_size(static_cast<std::size_t>(act_dim), config.learning_rate);
  policy.critic_opt =
      AdamState::for_size(policy.params.critic.size(), config.learning_rate);
  return policy;
}

double gaussian_log_prob(const Vector& action, const Vector& mean,
                         const Vector& log_std) {
  double lp = 0.0;
  for (Eigen::Index j = 0; j < action.size(); ++j) {
    const double z = (action[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -0.5 * z * z - log_std[j] - kHalfLog2Pi;
  }
  return lp;
}

Vector mean_action(const PolicyParams& policy, const Vector& observation) {
  if (observation.size() != policy.obs_dim()) {
    throw ConfigError("observation dimension does not match the policy");
  }
  return mlp_forward(policy.actor, observation);
}

double state_value(const PolicyParams& policy, const Vector& observation) {
  return mlp_forward(policy.critic, observation)[0];
}

ActResult act(const PolicyParams& policy, const Vector& observation, Rng& rng) {
  const Vector mean = mean_action(policy, observation);
  ActResult out;
  out.action.resize(mean.size());
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    out.action[j] = mean[j] + std::exp(policy.log_std[j]) * rng.normal(0.0, 1.0);
  }
  out.log_prob = gaussian_log_prob(out.action, mean, policy.log_std);
  out.value = state_value(policy, observation);
  return out;
}

void RolloutBuffer::clear() {
  observations.clear();
  actions.clear();
  rewards.clear();
  values.clear();
  log_probs.clear();
  dones.clear();
  bootstrap_value = 0.0;
}

// ---------------------------------------------------------------------------

Advantages gae_advantages(const std::vector<double>& rewards,
                          const std::vector<double>& values,
                          const std::vector<bool>& dones, double gamma,
                          double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n + 1 || dones.size() != n) {
    throw ConfigError("gae: values must have one more entry than rewards");
  }
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double not_done = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * values[t + 1] * not_done - values[t];
    next_adv = delta + gamma * lambda * not_done * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

Advantages gae_advantages(const RolloutBuffer& buffer, double gamma,
                          double lambda) {
  std::vector<double> values = buffer.values;
  values.push_back(buffer.bootstrap_value);
  return gae_advantages(buffer.rewards, values, buffer.dones, gamma, lambda);
}

std::vector<double> normalize_advantages(const std::vector<double>& adv) {
  if (adv.empty()) return {};
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> out(adv.size());
  for (std::size_t i = 0; i < adv.size(); ++i) {
    out[i] = sd > 0.0 ? (adv[i] - mean) / sd : adv[i] - mean;
  }
  return out;
}

// ---------------------------------------------------------------------------

PpoLossTerms ppo_objective(const PolicyParams& policy, const PpoBatch& batch,
                           const PolicyConfig& config, PpoGrad* grad) {
  const auto batch_size = batch.observations.cols();
  if (batch_size == 0) throw RuntimeError("ppo_objective: empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch_size);
  const Eigen::Index act_dim = policy.log_std.size();

  MlpCache actor_cache;
  MlpCache critic_cache;
  const Matrix mean =
      mlp_forward_batch(policy.actor, batch.observations, &actor_cache);
  const Matrix value =
      mlp_forward_batch(policy.critic, batch.observations, &critic_cache);
  const Vector inv_std = (-policy.log_std.array()).exp();

  // z = (a - mu) / sigma, per dimension and sample.
  const Matrix z =
      ((batch.actions - mean).array().colwise() * inv_std.array()).matrix();
  const double log_norm = policy.log_std.sum() + act_dim * kHalfLog2Pi;
  const Vector log_prob =
      (-0.5 * z.array().square().colwise().sum()).transpose() - log_norm;

  PpoLossTerms terms;
  Vector dloss_dlogp(batch_size);
  const double lo = 1.0 - config.clip_eps;
  const double hi = 1.0 + config.clip_eps;
  for (Eigen::Index i = 0; i < batch_size; ++i) {
    const double log_ratio = log_prob[i] - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantages[i];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, lo, hi) * adv;
    // The min picks the unclipped term whenever it is not larger; only then
    // does the ratio carry gradient.
    const bool active = unclipped <= clipped;
    terms.surrogate += std::min(unclipped, clipped);
    dloss_dlogp[i] = active ? -inv_n * unclipped : 0.0;
    terms.mean_abs_log_ratio += std::abs(log_ratio);
    terms.approx_kl += -log_ratio;
    if (ratio < lo || ratio > hi) terms.clip_fraction += 1.0;
  }
  terms.surrogate *= inv_n;
  terms.mean_abs_log_ratio *= inv_n;
  terms.approx_kl *= inv_n;
  terms.clip_fraction *= inv_n;

  const Vector value_err = value.row(0).transpose() - batch.returns;
  terms.value_loss = value_err.squaredNorm() * inv_n;
  terms.entropy =
      policy.log_std.sum() + act_dim * (kHalfLog2Pi + 0.5);
  terms.loss = -terms.surrogate + config.value_coef * terms.value_loss -
               config.entropy_coef * terms.entropy;

  if (grad != nullptr) {
    // d logp / d mu = z / sigma; d logp / d log_std = z^2 - 1.
    Matrix actor_upstream =
        (z.array().colwise() * inv_std.array()).matrix();
    actor_upstream.array().rowwise() *= dloss_dlogp.transpose().array();
    grad->actor = mlp_backward_batch(policy.actor, actor_cache, actor_upstream);

    grad->log_std = ((z.array().square() - 1.0).matrix() * dloss_dlogp);
    grad->log_std.array() -= config.entropy_coef;

    const Matrix critic_upstream =
        (2.0 * config.value_coef * inv_n) * value_err.transpose();
    grad->critic =
        mlp_backward_batch(policy.critic, critic_cache, critic_upstream);
  }
  return terms;
}

PpoStats ppo_update(Policy& policy, const RolloutBuffer& buffer,
                    const PolicyConfig& config, Rng& rng) {
  const std::size_t n = buffer.size();
  if (n == 0) throw RuntimeError("ppo_update: empty rollout buffer");
  const int obs_dim = policy.params.obs_dim();
  const int act_dim = policy.params.act_dim();

  const Advantages gae = gae_advantages(buffer, config.gamma, config.lambda);
  const std::vector<double> adv = normalize_advantages(gae.advantages);

  Matrix obs(obs_dim, static_cast<Eigen::Index>(n));
  Matrix actions(act_dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    obs.col(static_cast<Eigen::Index>(i)) = buffer.observations[i];
    actions.col(static_cast<Eigen::Index>(i)) = buffer.actions[i];
  }

  const auto mb = static_cast<std::size_t>(std::max(1, config.minibatch));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  PpoStats stats;
  std::size_t steps = 0;
  for (int epoch = 0; epoch < config.epochs && !stats.early_stopped; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t stop = std::min(n, start + mb);
      const auto b = static_cast<Eigen::Index>(stop - start);
      PpoBatch batch;
      batch.observations.resize(obs_dim, b);
      batch.actions.resize(act_dim, b);
      batch.old_log_probs.resize(b);
      batch.advantages.resize(b);
      batch.returns.resize(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const std::size_t i = order[start + static_cast<std::size_t>(k)];
        const auto col = static_cast<Eigen::Index>(i);
        batch.observations.col(k) = obs.col(col);
        batch.actions.col(k) = actions.col(col);
        batch.old_log_probs[k] = buffer.log_probs[i];
        batch.advantages[k] = adv[i];
        batch.returns[k] = gae.returns[i];
      }
      PpoGrad grad;
      const PpoLossTerms terms =
          ppo_objective(policy.params, batch, config, &grad);
      if (terms.mean_abs_log_ratio > config.max_mean_abs_log_ratio) {
        stats.early_stopped = true;
        break;
      }
      adam_step(policy.actor_opt, policy.params.actor, grad.actor);
      adam_step(policy.log_std_opt, policy.params.log_std, grad.log_std);
      adam_step(policy.critic_opt, policy.params.critic, grad.critic);
      stats.approx_kl += terms.approx_kl;
      stats.entropy += terms.entropy;
      stats.surrogate += terms.surrogate;
      stats.value_loss += terms.value_loss;
      stats.clip_fraction += terms.clip_fraction;
      ++steps;
    }
    ++stats.epochs_run;
  }
  if (steps > 0) {
    const double inv = 1.0 / static_cast<double>(steps);
    stats.approx_kl *= inv;
    stats.entropy *= inv;
    stats.surrogate *= inv;
    stats.value_loss *= inv;
    stats.clip_fraction *= inv;
  }
  return stats;
}

}  // namespace prefscale
