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

#include "prefscale/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <exception>
#include <filesystem>
#include <optional>
#include <thread>

#include "json.hpp"
#include "prefscale/errors.hpp"
#include "prefscale/estimator.hpp"
#include "prefscale/oracle.hpp"
#include "prefscale/persistence.hpp"
#include "prefscale/text_io.hpp"
#include "prefscale/trajectory.hpp"

namespace prefscale {

using nlohmann::json;

std::vector<std::int64_t> schedule_queries(std::int64_t total_steps, int budget,
                                           std::int64_t warmup_steps,
                                           int segment_length) {
  if (budget < 1) throw ConfigError("query schedule needs a budget of at least 1");
  if (segment_length < 1) throw ConfigError("segment length must be positive");
  if (warmup_steps < 0 || warmup_steps >= total_steps) {
    throw ConfigError("warmup must lie inside the run");
  }
  const std::int64_t feasible = total_steps / segment_length;
  if (budget > feasible) {
    throw ConfigError("label budget " + std::to_string(budget) +
                      " exceeds the " + std::to_string(feasible) +
                      " segments the run can produce");
  }
  std::vector<std::int64_t> steps(static_cast<std::size_t>(budget));
  const std::int64_t span = total_steps - warmup_steps;
  for (int i = 0; i < budget; ++i) {
    steps[static_cast<std::size_t>(i)] = warmup_steps + i * span / budget;
  }
  return steps;
}

RoutePlan make_route_plan(int budget, double demo_fraction, double init_share) {
  if (budget < 0) throw ConfigError("negative label budget");
  if (demo_fraction < 0.0 || demo_fraction > 1.0 || init_share < 0.0 ||
      init_share > 1.0) {
    throw ConfigError("route plan fractions must lie in [0, 1]");
  }
  RoutePlan plan;
  plan.budget = budget;
  plan.estimator_slots = static_cast<int>(std::lround(demo_fraction * budget));
  plan.initial_slots = std::min(static_cast<int>(std::lround(init_share * budget)),
                                budget - plan.estimator_slots);
  plan.estimator_slot.assign(static_cast<std::size_t>(budget), false);
  // Bresenham spread of E estimator slots over the M slots after the prefix.
  const std::int64_t m = budget - plan.initial_slots;
  const std::int64_t e = plan.estimator_slots;
  for (std::int64_t j = 0; j < m; ++j) {
    if ((j + 1) * e / m > j * e / m) {
      plan.estimator_slot[static_cast<std::size_t>(plan.initial_slots + j)] = true;
    }
  }
  return plan;
}

RouteDecision route_label(const RoutePlan& plan, std::size_t slot,
                          const EstimatorGate& gate) {
  if (slot >= plan.estimator_slot.size()) {
    throw RuntimeError("label slot " + std::to_string(slot) +
                       " is beyond the budget");
  }
  if (!plan.estimator_slot[slot]) return {false, RouteReason::kLabeller};
  if (!gate.fitted) return {false, RouteReason::kNotFitted};
  if (!gate.open()) return {false, RouteReason::kGateClosed};
  return {true, RouteReason::kEstimator};
}

std::string ledger_json(const LabelLedger& ledger) {
  json subs = json::array();
  for (const auto& s : ledger.substitutions) {
    subs.push_back({{"slot", s.slot}, {"reason", s.reason}});
  }
  json fits = json::array();
  for (const auto& f : ledger.estimator_fits) {
    fits.push_back({{"at_labels", f.at_labels},
                    {"model", f.model},
                    {"held_out_mse", f.held_out_mse},
                    {"ols_mse", f.ols_mse},
                    {"svr_mse", f.svr_mse}});
  }
  json j = {{"budget", ledger.budget},
            {"human_count", ledger.human_count},
            {"estimator_count", ledger.estimator_count},
            {"total", ledger.total()},
            {"query_steps", ledger.query_steps},
            {"substitutions", subs},
            {"estimator_fits", fits}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

std::uint64_t snapshot_checksum(const RewardPredictor& model) {
  // FNV-1a over the raw parameter bytes and normalization moments.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  const Vector& v = model.net.values();
  mix(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  const double moments[2] = {model.output_norm.mean(),
                             model.output_norm.variance()};
  const std::int64_t count = model.output_norm.count();
  mix(moments, sizeof(moments));
  mix(&count, sizeof(count));
  return h;
}

std::int64_t SnapshotCell::publish(const RewardPredictor& model) {
  auto snap = std::make_shared<ParamSnapshot>();
  snap->model.obs_dim = model.obs_dim;
  snap->model.act_dim = model.act_dim;
  snap->model.net = model.net;
  snap->model.output_norm = model.output_norm;
  snap->model.norm_warmup = model.norm_warmup;
  snap->checksum = snapshot_checksum(snap->model);
  std::lock_guard lock(mu_);
  snap->id = next_id_++;
  latest_ = std::move(snap);
  return latest_->id;
}

std::shared_ptr<const ParamSnapshot> SnapshotCell::read() const {
  std::lock_guard lock(mu_);
  return latest_;
}

// ---------------------------------------------------------------------------

EvalSummary evaluate_policy(const EnvSpec& spec, const PolicyParams& policy,
                            int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
  if (policy.obs_dim() != spec.obs_dim || policy.act_dim() != spec.act_dim) {
    throw ConfigError("policy dimensions do not match environment " +
                      spec.name);
  }
  Rng rng(seed, StreamId::kEvaluation);
  EvalSummary out;
  RunningStats stats;
  for (int e = 0; e < episodes; ++e) {
    auto [state, obs] = reset(spec, rng.next_u64());
    double total = 0.0;
    bool done = false;
    while (!done) {
      auto [next, result] = step(spec, state, mean_action(policy, obs));
      total += result.true_reward;
      done = result.done;
      state = std::move(next);
      obs = std::move(result.observation);
    }
    out.returns.push_back(total);
    stats.push(total);
  }
  out.mean = stats.mean();
  out.std = stats.stddev();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

namespace fs = std::filesystem;

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

class Experiment {
 public:
  Experiment(const RunConfig& config, std::string run_dir, const RunHooks& hooks)
      : config_(config),
        run_dir_(std::move(run_dir)),
        hooks_(hooks),
        spec_(make_env_spec(config.env)),
        env_rng_(config.seed, StreamId::kEnvironment),
        policy_rng_(config.seed, StreamId::kPolicy),
        query_rng_(config.seed, StreamId::kQuerySelection),
        split_rng_(config.seed, StreamId::kEstimatorSplit),
        reward_rng_(config.seed, StreamId::kRewardModel),
        queue_(static_cast<std::size_t>(config.queue_capacity)),
        ctx_(static_cast<std::size_t>(config.context_window)) {
    Rng init_rng(config.seed, StreamId::kInit);
    policy_ = make_policy(spec_.obs_dim, spec_.act_dim, config.policy, init_rng);
    reward_ = make_reward_predictor(spec_.obs_dim, spec_.act_dim,
                                    config.reward, init_rng);
    baseline_ = config.labeler == Labeler::kTrueReward;
    ledger_.budget = baseline_ ? 0 : config.label_budget;
    if (!baseline_) {
      const auto warmup = static_cast<std::int64_t>(
          std::floor(config.warmup_fraction * static_cast<double>(config.total_steps)));
      schedule_ = schedule_queries(config.total_steps, config.label_budget,
                                   warmup, config.segment_length);
      plan_ = make_route_plan(config.label_budget, config.demo_fraction,
                              config.init_share);
    }
    gate_.mse_gate = config.mse_gate;
    if (config.labeler == Labeler::kHumanUi && hooks.broker == nullptr) {
      throw ConfigError("the human_ui labeller needs a label service");
    }
    auto [state, obs] = reset(spec_, env_rng_.next_u64());
    env_state_ = std::move(state);
    obs_ = std::move(obs);
  }

  RunArtifacts run() {
    fs::create_directories(fs::path(run_dir_) / "checkpoints");
    write_file((fs::path(run_dir_) / "config.txt").string(),
               config_to_text(config_));
    fs::remove(fs::path(run_dir_) / "FAILED");
    metrics_ = "step,true_return,pred_return,labels_so_far,human_labels,"
               "estimator_labels\n";
    policy_stats_ = "step,mean_return_true,mean_return_pred,kl,entropy\n";
    reward_fit_ = "epoch,mean_loss\n";
    cell_.publish(reward_);
    if (hooks_.status) {
      hooks_.status->set({0, 0, ledger_.budget, 0, 0, 0.0});
    }
    if (hooks_.broker) hooks_.broker->set_active(true);
    try {
      if (config_.synchronous) {
        run_synchronous();
      } else {
        run_asynchronous();
      }
    } catch (const std::exception& e) {
      if (hooks_.broker) {
        hooks_.broker->close_all();
        hooks_.broker->set_active(false);
      }
      try {
        write_outputs(false);
      } catch (...) {
      }
      write_file((fs::path(run_dir_) / "FAILED").string(),
                 std::string(e.what()) + "\n");
      throw;
    }
    if (hooks_.broker) hooks_.broker->set_active(false);
    final_eval_ = evaluate_policy(spec_, policy_.params, config_.eval_episodes,
                                  config_.seed);
    write_outputs(true);
    RunArtifacts out;
    out.run_dir = run_dir_;
    out.ledger = ledger_;
    out.final_eval = final_eval_;
    out.steps_done = steps_done_;
    out.preference_count = db_.size();
    out.snapshots_published = cell_.read()->id;
    return out;
  }

 private:
  // ----- rollout -----

  struct ChunkSummary {
    std::vector<double> true_returns;
    std::vector<double> pred_returns;
  };

  // Collects `n` steps with the policy under `snap` and pushes finished
  // episodes' segments to the queue.
  ChunkSummary collect(int n, const ParamSnapshot& snap, RolloutBuffer& buffer) {
    ChunkSummary summary;
    buffer.clear();
    bool last_done = false;
    for (int t = 0; t < n; ++t) {
      ActResult a = act(policy_.params, obs_, policy_rng_);
      Vector applied = clamp_action(spec_, a.action);
      auto [next, result] = step(spec_, env_state_, applied);
      double channel = result.true_reward;
      double raw = 0.0;
      if (!baseline_) {
        raw = predict_reward(snap.model, obs_, applied);
        channel = normalize_prediction(snap.model, raw).value;
      }
      buffer.observations.push_back(obs_);
      buffer.actions.push_back(a.action);
      buffer.rewards.push_back(channel);
      buffer.values.push_back(a.value);
      buffer.log_probs.push_back(a.log_prob);
      buffer.dones.push_back(result.done);
      episode_.push_back({obs_, applied, result.true_reward, raw});
      episode_true_ += result.true_reward;
      episode_pred_ += raw;
      env_state_ = std::move(next);
      obs_ = std::move(result.observation);
      last_done = result.done;
      if (result.done) {
        summary.true_returns.push_back(episode_true_);
        summary.pred_returns.push_back(episode_pred_);
        if (!baseline_) {
          auto segs = extract_segments(
              episode_, static_cast<std::size_t>(config_.segment_length),
              static_cast<std::size_t>(config_.segment_stride), episode_id_);
          std::lock_guard lock(mu_);
          for (auto& s : segs) queue_.push(std::move(s));
        }
        episode_.clear();
        episode_true_ = 0.0;
        episode_pred_ = 0.0;
        ++episode_id_;
        auto [state, obs] = reset(spec_, env_rng_.next_u64());
        env_state_ = std::move(state);
        obs_ = std::move(obs);
      }
    }
    buffer.bootstrap_value =
        last_done ? 0.0 : state_value(policy_.params, obs_);
    return summary;
  }

  // One rollout chunk plus the policy update; returns the steps taken.
  int rollout_chunk() {
    const int n = static_cast<int>(std::min<std::int64_t>(
        config_.policy.horizon, config_.total_steps - rollout_steps_));
    auto snap = cell_.read();
    RolloutBuffer buffer;
    ChunkSummary summary = collect(n, *snap, buffer);
    PpoStats stats = ppo_update(policy_, buffer, config_.policy, policy_rng_);
    rollout_steps_ += n;
    if (!summary.true_returns.empty()) {
      std::lock_guard lock(mu_);
      last_true_ = mean_of(summary.true_returns);
      last_pred_ = mean_of(summary.pred_returns);
    }
    policy_stats_ += std::to_string(rollout_steps_) + "," +
                     format_double(last_true_) + "," +
                     format_double(last_pred_) + "," +
                     format_double(stats.approx_kl) + "," +
                     format_double(stats.entropy) + "\n";
    return n;
  }

  void record_metrics() {
    std::lock_guard lock(mu_);
    metrics_ += std::to_string(steps_done_) + "," + format_double(last_true_) +
                "," + format_double(last_pred_) + "," +
                std::to_string(ledger_.total()) + "," +
                std::to_string(ledger_.human_count) + "," +
                std::to_string(ledger_.estimator_count) + "\n";
  }

  void publish_status() {
    if (!hooks_.status) return;
    StatusSnapshot s;
    {
      std::lock_guard lock(mu_);
      s.steps_done = steps_done_;
      s.labels_done = ledger_.total();
      s.budget = ledger_.budget;
      s.human_count = ledger_.human_count;
      s.estimator_count = ledger_.estimator_count;
      s.latest_mean_return = last_true_;
    }
    hooks_.status->set(s);
  }

  void log(const std::string& msg) const {
    if (hooks_.log) hooks_.log(msg);
  }

  // ----- elicitation -----

  std::size_t next_slot() const { return ledger_.query_steps.size(); }

  void commit(PreferenceRecord record, const std::string& substitution,
              std::size_t slot) {
    {
      std::lock_guard lock(mu_);
      if (record.source == LabelSource::kEstimator) {
        ++ledger_.estimator_count;
      } else {
        ++ledger_.human_count;
      }
      ledger_.query_steps.push_back(record.timestep);
      if (!substitution.empty()) {
        ledger_.substitutions.push_back({slot, substitution});
      }
      db_.push_back(std::move(record));
      ++labels_since_fit_;
    }
    cv_.notify_all();
    publish_status();
  }

  double oracle_label(const Segment& left, const Segment& right, bool scaled) {
    std::lock_guard lock(mu_);
    ctx_.add(left.true_return, right.true_return);
    return scaled ? scale_preference(ctx_, left.true_return, right.true_return)
                  : hard_preference(left.true_return, right.true_return);
  }

  // Issues the query for `slot`; false when the queue cannot supply a pair.
  bool issue_query(std::size_t slot) {
    PreferenceRecord record;
    {
      std::lock_guard lock(mu_);
      if (queue_.size() < 2) return false;
      auto [left, right] = sample_pair(queue_, query_rng_);
      record.left = std::move(left);
      record.right = std::move(right);
      record.timestep = steps_done_;
    }
    const RouteDecision route = route_label(plan_, slot, gate_);
    std::string substitution;
    if (route.reason == RouteReason::kNotFitted) {
      substitution = "estimator_not_fitted";
    } else if (route.reason == RouteReason::kGateClosed) {
      substitution = "estimator_mse_above_gate";
    }
    if (route.use_estimator) {
      record.z_hat = predict(estimator_->model,
                             featurize_pair(record.left, record.right));
      record.source = LabelSource::kEstimator;
      commit(std::move(record), substitution, slot);
      return true;
    }
    switch (config_.labeler) {
      case Labeler::kOracleScaled:
      case Labeler::kOracleHard: {
        const bool scaled = config_.labeler == Labeler::kOracleScaled;
        record.z_hat = oracle_label(record.left, record.right, scaled);
        record.source =
            scaled ? LabelSource::kOracleScaled : LabelSource::kOracleHard;
        commit(std::move(record), substitution, slot);
        break;
      }
      case Labeler::kHumanUi:
        ask_human(std::move(record), substitution, slot);
        break;
      case Labeler::kTrueReward:
        throw RuntimeError("baseline runs issue no queries");
    }
    maybe_refit_estimator();
    return true;
  }

  void ask_human(PreferenceRecord record, const std::string& substitution,
                 std::size_t slot) {
    QueryPayload payload =
        make_query_payload(spec_, record.left, record.right, record.timestep);
    const PreferenceRecord pending = record;
    const std::int64_t id = hooks_.broker->post(
        std::move(payload), [this, pending, substitution, slot](double z) {
          PreferenceRecord r = pending;
          r.z_hat = z;
          r.source = LabelSource::kHumanUi;
          {
            std::lock_guard lock(mu_);
            ctx_.add(r.left.true_return, r.right.true_return);
          }
          commit(std::move(r), substitution, slot);
        });
    const auto answer = hooks_.broker->wait(
        id, std::chrono::duration<double>(config_.query_timeout_s));
    if (answer) return;
    if (abort_) throw RuntimeError("run aborted while waiting for a label");
    log("query " + std::to_string(id) + " timed out; rerouting");
    if (gate_.open()) {
      record.z_hat = predict(estimator_->model,
                             featurize_pair(record.left, record.right));
      record.source = LabelSource::kEstimator;
      commit(std::move(record), "timeout_estimator", slot);
    } else {
      record.z_hat = oracle_label(record.left, record.right, true);
      record.source = LabelSource::kOracleScaled;
      commit(std::move(record), "timeout_oracle", slot);
    }
  }

  void maybe_refit_estimator() {
    if (plan_.estimator_slots == 0) return;
    std::vector<PreferenceRecord> labelled;
    std::int64_t human = 0;
    {
      std::lock_guard lock(mu_);
      human = ledger_.human_count;
      if (human < plan_.initial_slots || human < 10) return;
      if (gate_.fitted && human - estimator_fit_at_ < config_.estimator_refit_every) {
        return;
      }
      for (const auto& r : db_) {
        if (r.source != LabelSource::kEstimator) labelled.push_back(r);
      }
    }
    TrainedEstimator trained = train_estimator(
        labelled, config_.split_fraction, config_.svr, split_rng_);
    estimator_fit_at_ = human;
    gate_.fitted = true;
    gate_.held_out_mse = trained.held_out_mse;
    std::lock_guard lock(mu_);
    ledger_.estimator_fits.push_back({human, model_name(trained.model),
                                      trained.held_out_mse,
                                      trained.ols_mse.mean,
                                      trained.svr_mse.mean});
    estimator_ = std::move(trained);
    log("estimator refit on " + std::to_string(human) + " labels: " +
        model_name(estimator_->model) + " mse " +
        format_double(estimator_->held_out_mse));
  }

  // ----- reward fitting -----

  void fit_reward_model() {
    std::vector<PreferenceRecord> data;
    std::vector<Segment> segments;
    {
      std::lock_guard lock(mu_);
      data = db_;
      segments.assign(queue_.buffer().begin(), queue_.buffer().end());
      labels_since_fit_ = 0;
    }
    if (data.empty()) return;
    const int minibatch =
        std::min<int>(config_.reward.minibatch, static_cast<int>(data.size()));
    FitReport report = fit(reward_, data, config_.reward.epochs, minibatch,
                           config_.reward.l2, reward_rng_);
    for (double loss : report.epoch_mean_loss) {
      reward_fit_ += std::to_string(++fit_epochs_) + "," + format_double(loss) +
                     "\n";
    }
    // Normalization statistics describe the model's output on recent
    // behaviour, so they are recomputed after every fit.
    reward_.output_norm.reset();
    for (const auto& s : segments) {
      const Vector r = predict_segment(reward_, s);
      for (Eigen::Index i = 0; i < r.size(); ++i) {
        observe_prediction(reward_, r[i]);
      }
    }
    cell_.publish(reward_);
  }

  // ----- drivers -----

  void run_synchronous() {
    std::size_t slot = 0;
    while (rollout_steps_ < config_.total_steps) {
      rollout_chunk();
      {
        std::lock_guard lock(mu_);
        steps_done_ = rollout_steps_;
      }
      while (slot < schedule_.size() && schedule_[slot] <= steps_done_) {
        if (!issue_query(slot)) break;
        ++slot;
      }
      if (pending_labels() >= config_.fit_interval) fit_reward_model();
      record_metrics();
      publish_status();
    }
    while (slot < schedule_.size()) {
      if (!issue_query(slot)) {
        throw RuntimeError("run ended with fewer than two segments queued");
      }
      ++slot;
    }
    if (pending_labels() > 0) fit_reward_model();
  }

  std::int64_t pending_labels() {
    std::lock_guard lock(mu_);
    return labels_since_fit_;
  }

  void fail(std::exception_ptr e) {
    {
      std::lock_guard lock(mu_);
      if (!error_) error_ = e;
      abort_ = true;
    }
    cv_.notify_all();
    if (hooks_.broker) hooks_.broker->close_all();
  }

  void run_asynchronous() {
    auto guarded = [this](auto fn) {
      return [this, fn] {
        try {
          fn();
        } catch (...) {
          fail(std::current_exception());
        }
      };
    };
    std::thread rollout(guarded([this] {
      while (rollout_steps_ < config_.total_steps && !abort_) {
        rollout_chunk();
        {
          std::lock_guard lock(mu_);
          steps_done_ = rollout_steps_;
        }
        record_metrics();
        publish_status();
        cv_.notify_all();
      }
      {
        std::lock_guard lock(mu_);
        rollout_done_ = true;
      }
      cv_.notify_all();
    }));
    std::thread elicitation(guarded([this] {
      for (std::size_t slot = 0; slot < schedule_.size(); ++slot) {
        while (true) {
          {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] {
              return abort_ || rollout_done_ ||
                     (steps_done_ >= schedule_[slot] && queue_.size() >= 2);
            });
            if (abort_) return;
            if (rollout_done_ && queue_.size() < 2) {
              throw RuntimeError("run ended with fewer than two segments queued");
            }
          }
          if (issue_query(slot)) break;
        }
      }
      {
        std::lock_guard lock(mu_);
        elicitation_done_ = true;
      }
      cv_.notify_all();
    }));
    std::thread fitter(guarded([this] {
      while (true) {
        {
          std::unique_lock lock(mu_);
          cv_.wait(lock, [&] {
            return abort_ || elicitation_done_ ||
                   labels_since_fit_ >= config_.fit_interval;
          });
          if (abort_) return;
          if (elicitation_done_ && labels_since_fit_ == 0) return;
        }
        fit_reward_model();
      }
    }));
    rollout.join();
    elicitation.join();
    fitter.join();
    if (error_) std::rethrow_exception(error_);
  }

  // ----- outputs -----

  void write_outputs(bool complete) {
    const fs::path dir(run_dir_);
    std::lock_guard lock(mu_);
    write_file((dir / "metrics.csv").string(), metrics_);
    write_file((dir / "policy_stats.csv").string(), policy_stats_);
    write_file((dir / "reward_fit.csv").string(), reward_fit_);
    save_preference_db((dir / "preferences.db").string(), db_);
    write_file((dir / "ledger.json").string(), ledger_json(ledger_));
    std::string report = "scenario,method,mse_mean,mse_std,chosen\n";
    if (estimator_) {
      const std::string scenario =
          spec_.name + "/" +
          std::to_string(std::lround(config_.split_fraction * 100.0));
      const bool svr = std::holds_alternative<SvrModel>(estimator_->model);
      report += scenario + ",OLS," + format_double(estimator_->ols_mse.mean) +
                "," + format_double(estimator_->ols_mse.std) + "," +
                (svr ? "0" : "1") + "\n";
      report += scenario + ",SVR," + format_double(estimator_->svr_mse.mean) +
                "," + format_double(estimator_->svr_mse.std) + "," +
                (svr ? "1" : "0") + "\n";
    }
    write_file((dir / "estimator_report.csv").string(), report);
    save_policy((dir / "checkpoints" / "policy.ckpt").string(), policy_.params);
    save_reward_model((dir / "checkpoints" / "reward_model.ckpt").string(),
                      reward_);
    json summary = {{"status", complete ? "complete" : "failed"},
                    {"env", spec_.name},
                    {"labeler", std::string(to_string(config_.labeler))},
                    {"seed", config_.seed},
                    {"steps_done", steps_done_},
                    {"labels", ledger_.total()},
                    {"human_count", ledger_.human_count},
                    {"estimator_count", ledger_.estimator_count}};
    if (complete) {
      summary["final_return_mean"] = final_eval_.mean;
      summary["final_return_std"] = final_eval_.std;
      summary["eval_returns"] = final_eval_.returns;
    }
    write_file((dir / "summary.json").string(), summary.dump(2) + "\n");
  }

  const RunConfig config_;
  const std::string run_dir_;
  const RunHooks hooks_;
  const EnvSpec spec_;
  bool baseline_ = false;

  Rng env_rng_;
  Rng policy_rng_;
  Rng query_rng_;
  Rng split_rng_;
  Rng reward_rng_;

  // Owned by the rollout worker.
  Policy policy_;
  EnvState env_state_;
  Vector obs_;
  std::vector<Transition> episode_;
  double episode_true_ = 0.0;
  double episode_pred_ = 0.0;
  std::int64_t episode_id_ = 0;
  std::int64_t rollout_steps_ = 0;
  double last_true_ = 0.0;
  double last_pred_ = 0.0;
  std::string policy_stats_;

  // Owned by the reward-fit worker.
  RewardPredictor reward_;
  std::string reward_fit_;
  std::int64_t fit_epochs_ = 0;

  // Owned by the elicitation worker.
  std::vector<std::int64_t> schedule_;
  RoutePlan plan_;
  EstimatorGate gate_;
  std::optional<TrainedEstimator> estimator_;
  std::int64_t estimator_fit_at_ = 0;

  // Shared, guarded by mu_.
  std::mutex mu_;
  std::condition_variable cv_;
  SegmentQueue queue_;
  ScalingContext ctx_;
  std::vector<PreferenceRecord> db_;
  LabelLedger ledger_;
  std::int64_t steps_done_ = 0;
  std::int64_t labels_since_fit_ = 0;
  bool rollout_done_ = false;
  bool elicitation_done_ = false;
  std::atomic<bool> abort_ = false;
  std::exception_ptr error_;
  std::string metrics_;

  SnapshotCell cell_;
  EvalSummary final_eval_;
};

}  // namespace

RunArtifacts run_experiment(const RunConfig& config, const std::string& run_dir,
                            const RunHooks& hooks) {
  validate(config);
  Experiment experiment(config, run_dir, hooks);
  return experiment.run();
}

}  // namespace prefscale
