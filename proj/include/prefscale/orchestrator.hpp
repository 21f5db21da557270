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

#ifndef PREFSCALE_ORCHESTRATOR_HPP_
#define PREFSCALE_ORCHESTRATOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "prefscale/config.hpp"
#include "prefscale/envlib.hpp"
#include "prefscale/label_service.hpp"
#include "prefscale/policy.hpp"
#include "prefscale/reward_model.hpp"

namespace prefscale {

// ---------------------------------------------------------------------------
// Query timing and label routing.
// ---------------------------------------------------------------------------

// `budget` env-step indices, evenly spaced from `warmup_steps` on:
// warmup + floor(i * (total - warmup) / budget). Throws ConfigError when the
// budget exceeds the number of disjoint segments in the run.
std::vector<std::int64_t> schedule_queries(std::int64_t total_steps, int budget,
                                           std::int64_t warmup_steps,
                                           int segment_length);

struct RoutePlan {
  int budget = 0;
  int initial_slots = 0;    // labeller-only prefix
  int estimator_slots = 0;  // round(rho * budget)
  // true where the estimator is asked to answer.
  std::vector<bool> estimator_slot;
};

// The first round(init_share * budget) slots go to the labeller; the
// estimator slots are then spread evenly over the rest.
RoutePlan make_route_plan(int budget, double demo_fraction, double init_share);

struct EstimatorGate {
  bool fitted = false;
  double held_out_mse = 0.0;
  double mse_gate = 0.1;

  bool open() const { return fitted && held_out_mse <= mse_gate; }
};

enum class RouteReason { kLabeller, kEstimator, kNotFitted, kGateClosed };

struct RouteDecision {
  bool use_estimator = false;
  RouteReason reason = RouteReason::kLabeller;
  bool substituted() const {
    return reason == RouteReason::kNotFitted ||
           reason == RouteReason::kGateClosed;
  }
};

RouteDecision route_label(const RoutePlan& plan, std::size_t slot,
                          const EstimatorGate& gate);

// ---------------------------------------------------------------------------
// Label accounting.
// ---------------------------------------------------------------------------

struct Substitution {
  std::size_t slot = 0;
  std::string reason;
};

struct EstimatorFit {
  std::int64_t at_labels = 0;
  std::string model;
  double held_out_mse = 0.0;
  double ols_mse = 0.0;
  double svr_mse = 0.0;
};

struct LabelLedger {
  std::int64_t budget = 0;
  std::int64_t human_count = 0;  // labeller answers, oracle or human
  std::int64_t estimator_count = 0;
  std::vector<std::int64_t> query_steps;
  std::vector<Substitution> substitutions;
  std::vector<EstimatorFit> estimator_fits;

  std::int64_t total() const { return human_count + estimator_count; }
};

std::string ledger_json(const LabelLedger& ledger);

// ---------------------------------------------------------------------------
// Reward-model snapshots handed from the fitting worker to rollouts.
// ---------------------------------------------------------------------------

struct ParamSnapshot {
  std::int64_t id = 0;
  RewardPredictor model;
  std::uint64_t checksum = 0;
};

std::uint64_t snapshot_checksum(const RewardPredictor& model);

class SnapshotCell {
 public:
  // Copies `model`, assigns the next id and makes it visible atomically.
  std::int64_t publish(const RewardPredictor& model);
  // Most recent snapshot, or null before the first publish.
  std::shared_ptr<const ParamSnapshot> read() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const ParamSnapshot> latest_;
  std::int64_t next_id_ = 1;
};

// ---------------------------------------------------------------------------
// Experiments.
// ---------------------------------------------------------------------------

struct EvalSummary {
  std::vector<double> returns;
  double mean = 0.0;
  double std = 0.0;
};

// Greedy (mean-action) episodes with true rewards.
EvalSummary evaluate_policy(const EnvSpec& spec, const PolicyParams& policy,
                            int episodes, std::uint64_t seed);

struct RunHooks {
  // Needed for the human_ui labeller.
  LabelBroker* broker = nullptr;
  RunStatus* status = nullptr;
  std::function<void(const std::string&)> log;
};

struct RunArtifacts {
  std::string run_dir;
  LabelLedger ledger;
  EvalSummary final_eval;
  std::int64_t steps_done = 0;
  std::size_t preference_count = 0;
  std::int64_t snapshots_published = 0;
};

// Runs one experiment and writes into `run_dir`:
//   config.txt, metrics.csv, policy_stats.csv, reward_fit.csv,
//   preferences.db, ledger.json, estimator_report.csv, summary.json,
//   checkpoints/policy.ckpt, checkpoints/reward_model.ckpt.
// On failure whatever was produced is kept, a FAILED file holds the reason
// and the exception propagates.
RunArtifacts run_experiment(const RunConfig& config, const std::string& run_dir,
                            const RunHooks& hooks = {});

}  // namespace prefscale

#endif  // PREFSCALE_ORCHESTRATOR_HPP_
