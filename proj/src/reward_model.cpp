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

#include "prefscale/reward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefscale/errors.hpp"

namespace prefscale {
namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector concat(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

}  // namespace

RewardPredictor make_reward_predictor(int obs_dim, int act_dim,
                                      const RewardModelConfig& config,
                                      Rng& rng) {
  RewardPredictor model;
  model.obs_dim = obs_dim;
  model.act_dim = act_dim;
  model.net = make_mlp(obs_dim + act_dim, config.hidden, 1, config.activation,
                       rng);
  // A zero output layer makes the untrained predictor r = 0 everywhere, so
  // the policy sees no spurious reward before the first fit.
  const std::size_t last = model.net.layers().size() - 1;
  model.net.weight(last).setZero();
  model.optimizer = AdamState::for_size(model.net.size(), config.learning_rate);
  model.norm_warmup = config.norm_warmup;
  return model;
}

double predict_reward(const RewardPredictor& model, const Vector& observation,
                      const Vector& action) {
  if (observation.size() != model.obs_dim || action.size() != model.act_dim) {
    throw ConfigError("reward model input dimension mismatch");
  }
  return mlp_forward(model.net, concat(observation, action))[0];
}

Vector predict_segment(const RewardPredictor& model, const Segment& segment) {
  if (segment.obs_dim() != model.obs_dim ||
      segment.act_dim() != model.act_dim) {
    throw ConfigError("segment dimensions do not match the reward model");
  }
  return mlp_forward_batch(model.net, segment.input_matrix()).row(0).transpose();
}

double predicted_segment_return(const RewardPredictor& model,
                                const Segment& segment) {
  return predict_segment(model, segment).sum();
}

double pair_probability(double sum_left, double sum_right) {
  const double d = sum_left - sum_right;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  // 1 - p is exact for p in [0.5, 1], which makes the pair sum exactly 1.
  return 1.0 - pair_probability(sum_right, sum_left);
}

double binary_entropy(double z) {
  double h = 0.0;
  if (z > 0.0) h -= z * std::log(z);
  if (z < 1.0) h -= (1.0 - z) * std::log(1.0 - z);
  return h;
}

double preference_loss(const PreferenceBatch& batch) {
  if (batch.empty()) throw RuntimeError("preference_loss: empty batch");
  double total = 0.0;
  for (const auto& p : batch) {
    const double d = p.left_return - p.right_return;
    // -log P(l > r) = softplus(-d), -log P(r > l) = softplus(d).
    total += p.z_hat * softplus(-d) + (1.0 - p.z_hat) * softplus(d);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> preference_loss_grad(const PreferenceBatch& batch) {
  if (batch.empty()) throw RuntimeError("preference_loss: empty batch");
  std::vector<double> grad;
  grad.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (const auto& p : batch) {
    grad.push_back((sigmoid(p.left_return - p.right_return) - p.z_hat) * inv_n);
  }
  return grad;
}

LossAndGrad preference_objective(
    const MlpParams& net, const std::vector<const PreferenceRecord*>& records,
    double l2) {
  if (records.empty()) throw RuntimeError("preference_objective: no records");
  // Columns: all left transitions of record 0, right of record 0, left of
  // record 1, ...
  std::vector<Eigen::Index> offsets;
  Eigen::Index total_cols = 0;
  for (const auto* r : records) {
    offsets.push_back(total_cols);
    total_cols += static_cast<Eigen::Index>(r->left.length());
    offsets.push_back(total_cols);
    total_cols += static_cast<Eigen::Index>(r->right.length());
  }
  Matrix inputs(net.input_dim(), total_cols);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Matrix l = records[i]->left.input_matrix();
    const Matrix r = records[i]->right.input_matrix();
    if (l.rows() != net.input_dim() || r.rows() != net.input_dim()) {
      throw ConfigError("segment dimensions do not match the reward model");
    }
    inputs.middleCols(offsets[2 * i], l.cols()) = l;
    inputs.middleCols(offsets[2 * i + 1], r.cols()) = r;
  }

  MlpCache cache;
  const Matrix out = mlp_forward_batch(net, inputs, &cache);

  PreferenceBatch batch;
  batch.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto nl = static_cast<Eigen::Index>(records[i]->left.length());
    const auto nr = static_cast<Eigen::Index>(records[i]->right.length());
    batch.push_back({out.row(0).segment(offsets[2 * i], nl).sum(),
                     out.row(0).segment(offsets[2 * i + 1], nr).sum(),
                     records[i]->z_hat});
  }

  LossAndGrad result;
  result.loss = preference_loss(batch);
  const std::vector<double> g = preference_loss_grad(batch);
  Matrix upstream(1, total_cols);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto nl = static_cast<Eigen::Index>(records[i]->left.length());
    const auto nr = static_cast<Eigen::Index>(records[i]->right.length());
    upstream.row(0).segment(offsets[2 * i], nl).setConstant(g[i]);
    upstream.row(0).segment(offsets[2 * i + 1], nr).setConstant(-g[i]);
  }
  result.grad = mlp_backward_batch(net, cache, upstream);

  if (l2 > 0.0) {
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
      const auto w = net.weight(k);
      result.loss += 0.5 * l2 * w.squaredNorm();
      result.grad.weight(k) += l2 * w;
    }
  }
  return result;
}

FitReport fit(RewardPredictor& model,
              const std::vector<PreferenceRecord>& database, int epochs,
              int minibatch, double l2, Rng& rng) {
  if (minibatch <= 0 || epochs < 0) {
    throw ConfigError("fit: epochs and minibatch must be positive");
  }
  if (database.size() < static_cast<std::size_t>(minibatch)) {
    throw ConfigError("fit: database smaller than one minibatch");
  }
  FitReport report;
  std::vector<std::size_t> order(database.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(minibatch)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(minibatch));
      std::vector<const PreferenceRecord*> batch;
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(&database[order[i]]);
      }
      LossAndGrad lg = preference_objective(model.net, batch, l2);
      if (!std::isfinite(lg.loss)) {
        report.aborted = true;
        throw RuntimeError("reward model fit: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batches));
      }
      adam_step(model.optimizer, model.net, lg.grad);
      loss_sum += lg.loss;
      ++batches;
    }
    report.epoch_mean_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return report;
}

NormalizedReward normalize_prediction(const RewardPredictor& model,
                                      double raw) {
  if (model.output_norm.count() < model.norm_warmup) return {raw, true};
  const double sd = model.output_norm.stddev();
  if (!(sd > 0.0)) return {raw - model.output_norm.mean(), false};
  return {(raw - model.output_norm.mean()) / sd, false};
}

NormalizedReward normalized_reward(const RewardPredictor& model,
                                   const Vector& observation,
                                   const Vector& action) {
  return normalize_prediction(model, predict_reward(model, observation, action));
}

void observe_prediction(RewardPredictor& model, double raw) {
  model.output_norm.push(raw);
}

}  // namespace prefscale
