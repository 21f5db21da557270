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

#ifndef PREFSCALE_CONFIG_HPP_
#define PREFSCALE_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "prefscale/estimator.hpp"
#include "prefscale/policy.hpp"
#include "prefscale/reward_model.hpp"

namespace prefscale {

enum class Labeler { kTrueReward, kOracleHard, kOracleScaled, kHumanUi };

std::string_view to_string(Labeler labeler);
// Accepts dashes or underscores: "oracle-scaled", "true_reward", ...
// "true-reward-baseline", "rlhp" and "rlhps" are aliases.
Labeler labeler_from_string(std::string_view name);

struct RunConfig {
  std::string env = "velocity_runner";
  std::int64_t total_steps = 100000;
  int label_budget = 200;
  Labeler labeler = Labeler::kOracleScaled;
  double demo_fraction = 0.0;
  double split_fraction = 0.7;
  std::uint64_t seed = 1;
  bool synchronous = true;
  bool faithful_budget = false;

  int segment_length = 25;
  int segment_stride = 25;
  int queue_capacity = 512;
  double warmup_fraction = 0.05;
  // Labels between reward-model refits.
  int fit_interval = 10;
  // Pairs kept in the scaling context; 0 keeps all.
  int context_window = 0;

  int estimator_refit_every = 50;
  double mse_gate = 0.1;
  // Share of the budget answered by the labeller before the estimator may
  // take slots.
  double init_share = 0.4;
  double query_timeout_s = 600.0;
  int eval_episodes = 5;

  PolicyConfig policy;
  RewardModelConfig reward;
  SvrConfig svr;
};

// Throws ConfigError describing the first violated constraint.
void validate(const RunConfig& config);

// Flat "key = value" text, one entry per line, '#' comments. Every field of
// RunConfig has a key; see config_keys().
std::string config_to_text(const RunConfig& config);

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};
// The key/value lines of a config text in file order, unvalidated.
std::vector<ConfigEntry> parse_config_entries(std::string_view text);

RunConfig config_from_text(std::string_view text,
                           const RunConfig& defaults = {});
// Applies one key; throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& config, std::string_view key,
                      std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);
std::vector<std::string> config_keys();

// Long-run label presets: 1400, or 700 with `reduced`.
int preset_label_budget(bool reduced);

}  // namespace prefscale

#endif  // PREFSCALE_CONFIG_HPP_
