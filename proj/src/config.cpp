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

#include "prefscale/config.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "prefscale/envlib.hpp"
#include "prefscale/errors.hpp"
#include "prefscale/text_io.hpp"

namespace prefscale {

std::string_view to_string(Labeler labeler) {
  switch (labeler) {
    case Labeler::kTrueReward:
      return "true_reward";
    case Labeler::kOracleHard:
      return "oracle_hard";
    case Labeler::kOracleScaled:
      return "oracle_scaled";
    case Labeler::kHumanUi:
      return "human_ui";
  }
  return "unknown";
}

Labeler labeler_from_string(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "true_reward" || key == "true_reward_baseline" || key == "ppo") {
    return Labeler::kTrueReward;
  }
  if (key == "oracle_hard" || key == "rlhp") return Labeler::kOracleHard;
  if (key == "oracle_scaled" || key == "rlhps") return Labeler::kOracleScaled;
  if (key == "human_ui" || key == "human") return Labeler::kHumanUi;
  throw ConfigError("unknown labeler '" + std::string(name) +
                    "' (expected true-reward, oracle-hard, oracle-scaled or "
                    "human-ui)");
}

int preset_label_budget(bool reduced) { return reduced ? 700 : 1400; }

namespace {

std::string format_hidden(const std::vector<int>& hidden) {
  std::string out;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(hidden[i]);
  }
  return out;
}

std::vector<int> parse_hidden(std::string_view value) {
  std::vector<int> out;
  for (auto part : split(value, ',')) {
    const auto width = parse_int(trim(part));
    if (width <= 0) throw ConfigError("hidden widths must be positive");
    out.push_back(static_cast<int>(width));
  }
  return out;
}

bool parse_bool(std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") {
    return true;
  }
  if (value == "false" || value == "0" || value == "no" || value == "off") {
    return false;
  }
  throw ConfigError("expected a boolean, got '" + std::string(value) + "'");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation parse_activation(std::string_view value) {
  if (value == "tanh") return Activation::kTanh;
  if (value == "relu") return Activation::kRelu;
  if (value == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + std::string(value) + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T>
Field int_field(T RunConfig::*member) {
  return {[member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, std::string_view v) {
            c.*member = static_cast<T>(parse_int(v));
          }};
}

Field real_field(double RunConfig::*member) {
  return {[member](const RunConfig& c) { return format_double(c.*member); },
          [member](RunConfig& c, std::string_view v) {
            c.*member = parse_double(v);
          }};
}

// Fields of nested structs.
template <typename S, typename T>
Field nested_int(S RunConfig::*outer, T S::*inner) {
  return {[=](const RunConfig& c) { return std::to_string(c.*outer.*inner); },
          [=](RunConfig& c, std::string_view v) {
            c.*outer.*inner = static_cast<T>(parse_int(v));
          }};
}

template <typename S>
Field nested_real(S RunConfig::*outer, double S::*inner) {
  return {[=](const RunConfig& c) { return format_double(c.*outer.*inner); },
          [=](RunConfig& c, std::string_view v) {
            c.*outer.*inner = parse_double(v);
          }};
}

const std::map<std::string, Field, std::less<>>& registry() {
  static const auto* fields = new std::map<std::string, Field, std::less<>>{
      {"env",
       {[](const RunConfig& c) { return c.env; },
        [](RunConfig& c, std::string_view v) {
          c.env = make_env_spec(v).name;
        }}},
      {"total_steps", int_field(&RunConfig::total_steps)},
      {"label_budget", int_field(&RunConfig::label_budget)},
      {"labeler",
       {[](const RunConfig& c) { return std::string(to_string(c.labeler)); },
        [](RunConfig& c, std::string_view v) {
          c.labeler = labeler_from_string(v);
        }}},
      {"demo_fraction", real_field(&RunConfig::demo_fraction)},
      {"split_fraction", real_field(&RunConfig::split_fraction)},
      {"seed",
       {[](const RunConfig& c) { return std::to_string(c.seed); },
        [](RunConfig& c, std::string_view v) {
          const auto s = parse_int(v);
          if (s < 0) throw ConfigError("seed must be non-negative");
          c.seed = static_cast<std::uint64_t>(s);
        }}},
      {"mode",
       {[](const RunConfig& c) {
          return std::string(c.synchronous ? "sync" : "async");
        },
        [](RunConfig& c, std::string_view v) {
          if (v == "sync") {
            c.synchronous = true;
          } else if (v == "async") {
            c.synchronous = false;
          } else {
            throw ConfigError("mode must be sync or async");
          }
        }}},
      {"faithful_budget",
       {[](const RunConfig& c) {
          return std::string(c.faithful_budget ? "true" : "false");
        },
        [](RunConfig& c, std::string_view v) {
          c.faithful_budget = parse_bool(v);
        }}},
      {"segment_length", int_field(&RunConfig::segment_length)},
      {"segment_stride", int_field(&RunConfig::segment_stride)},
      {"queue_capacity", int_field(&RunConfig::queue_capacity)},
      {"warmup_fraction", real_field(&RunConfig::warmup_fraction)},
      {"fit_interval", int_field(&RunConfig::fit_interval)},
      {"context_window", int_field(&RunConfig::context_window)},
      {"estimator_refit_every", int_field(&RunConfig::estimator_refit_every)},
      {"mse_gate", real_field(&RunConfig::mse_gate)},
      {"init_share", real_field(&RunConfig::init_share)},
      {"query_timeout_s", real_field(&RunConfig::query_timeout_s)},
      {"eval_episodes", int_field(&RunConfig::eval_episodes)},

      {"ppo.hidden",
       {[](const RunConfig& c) { return format_hidden(c.policy.hidden); },
        [](RunConfig& c, std::string_view v) {
          c.policy.hidden = parse_hidden(v);
        }}},
      {"ppo.activation",
       {[](const RunConfig& c) {
          return std::string(activation_name(c.policy.activation));
        },
        [](RunConfig& c, std::string_view v) {
          c.policy.activation = parse_activation(v);
        }}},
      {"ppo.learning_rate",
       nested_real(&RunConfig::policy, &PolicyConfig::learning_rate)},
      {"ppo.horizon", nested_int(&RunConfig::policy, &PolicyConfig::horizon)},
      {"ppo.minibatch",
       nested_int(&RunConfig::policy, &PolicyConfig::minibatch)},
      {"ppo.epochs", nested_int(&RunConfig::policy, &PolicyConfig::epochs)},
      {"ppo.gamma", nested_real(&RunConfig::policy, &PolicyConfig::gamma)},
      {"ppo.lambda", nested_real(&RunConfig::policy, &PolicyConfig::lambda)},
      {"ppo.clip_eps",
       nested_real(&RunConfig::policy, &PolicyConfig::clip_eps)},
      {"ppo.entropy_coef",
       nested_real(&RunConfig::policy, &PolicyConfig::entropy_coef)},
      {"ppo.value_coef",
       nested_real(&RunConfig::policy, &PolicyConfig::value_coef)},
      {"ppo.log_std_init",
       nested_real(&RunConfig::policy, &PolicyConfig::log_std_init)},
      {"ppo.max_mean_abs_log_ratio",
       nested_real(&RunConfig::policy, &PolicyConfig::max_mean_abs_log_ratio)},

      {"reward.hidden",
       {[](const RunConfig& c) { return format_hidden(c.reward.hidden); },
        [](RunConfig& c, std::string_view v) {
          c.reward.hidden = parse_hidden(v);
        }}},
      {"reward.activation",
       {[](const RunConfig& c) {
          return std::string(activation_name(c.reward.activation));
        },
        [](RunConfig& c, std::string_view v) {
          c.reward.activation = parse_activation(v);
        }}},
      {"reward.learning_rate",
       nested_real(&RunConfig::reward, &RewardModelConfig::learning_rate)},
      {"reward.l2", nested_real(&RunConfig::reward, &RewardModelConfig::l2)},
      {"reward.epochs",
       nested_int(&RunConfig::reward, &RewardModelConfig::epochs)},
      {"reward.minibatch",
       nested_int(&RunConfig::reward, &RewardModelConfig::minibatch)},
      {"reward.norm_warmup",
       nested_int(&RunConfig::reward, &RewardModelConfig::norm_warmup)},

      {"svr.c", nested_real(&RunConfig::svr, &SvrConfig::c)},
      {"svr.epsilon", nested_real(&RunConfig::svr, &SvrConfig::epsilon)},
      {"svr.gamma", nested_real(&RunConfig::svr, &SvrConfig::gamma)},
      {"svr.tolerance", nested_real(&RunConfig::svr, &SvrConfig::tolerance)},
      {"svr.max_sweeps", nested_int(&RunConfig::svr, &SvrConfig::max_sweeps)},
  };
  return *fields;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : registry()) keys.push_back(key);
  return keys;
}

void set_config_value(RunConfig& config, std::string_view key,
                      std::string_view value) {
  const auto it = registry().find(key);
  if (it == registry().end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  try {
    it->second.set(config, trim(value));
  } catch (const ParseError& e) {
    throw ConfigError("bad value for '" + std::string(key) + "': " + e.what());
  }
}

std::string get_config_value(const RunConfig& config, std::string_view key) {
  const auto it = registry().find(key);
  if (it == registry().end()) {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
  return it->second.get(config);
}

std::string config_to_text(const RunConfig& config) {
  std::ostringstream out;
  out << "# prefscale run configuration\n";
  for (const auto& [key, field] : registry()) {
    out << key << " = " << field.get(config) << '\n';
  }
  return out.str();
}

std::vector<ConfigEntry> parse_config_entries(std::string_view text) {
  std::vector<ConfigEntry> entries;
  std::size_t line_number = 0;
  for (auto raw : split(text, '\n')) {
    ++line_number;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("expected 'key = value'", line_number);
    }
    entries.push_back({std::string(trim(line.substr(0, eq))),
                       std::string(trim(line.substr(eq + 1))), line_number});
  }
  return entries;
}

RunConfig config_from_text(std::string_view text, const RunConfig& defaults) {
  RunConfig config = defaults;
  for (const auto& entry : parse_config_entries(text)) {
    try {
      set_config_value(config, entry.key, entry.value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(entry.line) + ": " + e.what());
    }
  }
  return config;
}

void validate(const RunConfig& config) {
  const EnvSpec spec = make_env_spec(config.env);
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
  };
  require(config.total_steps > 0, "total_steps must be positive");
  require(!(config.demo_fraction < 0.0) && config.demo_fraction <= 0.5,
          "demo_fraction must lie in the supported range 0-0.5");
  require(config.split_fraction > 0.0 && config.split_fraction < 1.0,
          "split_fraction must lie in (0, 1)");
  require(config.segment_length >= 1, "segment_length must be positive");
  require(config.segment_stride >= 1, "segment_stride must be positive");
  require(spec.horizon >= config.segment_length,
          "segment_length exceeds the environment horizon");
  require(config.queue_capacity >= 2, "queue_capacity must be at least 2");
  require(config.warmup_fraction >= 0.0 && config.warmup_fraction < 1.0,
          "warmup_fraction must lie in [0, 1)");
  require(config.fit_interval >= 1, "fit_interval must be positive");
  require(config.context_window >= 0, "context_window must be >= 0");
  require(config.estimator_refit_every >= 1,
          "estimator_refit_every must be positive");
  require(config.init_share >= 0.0 && config.init_share <= 1.0,
          "init_share must lie in [0, 1]");
  require(config.query_timeout_s > 0.0, "query_timeout_s must be positive");
  require(config.eval_episodes >= 1, "eval_episodes must be positive");
  require(config.policy.horizon >= 1 && config.policy.minibatch >= 1 &&
              config.policy.epochs >= 0,
          "ppo horizon, minibatch and epochs must be positive");
  require(config.reward.minibatch >= 1 && config.reward.epochs >= 0,
          "reward minibatch and epochs must be positive");
  if (config.labeler != Labeler::kTrueReward) {
    require(config.label_budget >= 1, "label_budget must be at least 1");
    if (config.faithful_budget) {
      require(static_cast<double>(config.label_budget) <=
                  1e-4 * static_cast<double>(config.total_steps),
              "faithful_budget: label_budget exceeds 0.01% of total_steps");
    }
  }
}

}  // namespace prefscale
