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

#include <string>

#include "doctest.h"
#include "prefscale/config.hpp"
#include "prefscale/errors.hpp"

using namespace prefscale;

TEST_CASE("defaults validate") {
  const RunConfig c;
  CHECK_NOTHROW(validate(c));
  CHECK(c.label_budget == 200);
  CHECK(c.total_steps == 100000);
  CHECK(c.fit_interval == 10);
  CHECK(c.estimator_refit_every == 50);
  CHECK(c.mse_gate == 0.1);
  CHECK(c.init_share == 0.4);
  CHECK(c.reward.learning_rate == 1e-4);
  CHECK(c.reward.minibatch == 64);
  CHECK(c.reward.epochs == 10);
  CHECK(c.policy.clip_eps == 0.2);
  CHECK(c.synchronous);
}

TEST_CASE("labeler names") {
  for (auto l : {Labeler::kTrueReward, Labeler::kOracleHard, Labeler::kOracleScaled,
                 Labeler::kHumanUi}) {
    CHECK(labeler_from_string(to_string(l)) == l);
  }
  CHECK(labeler_from_string("oracle-scaled") == Labeler::kOracleScaled);
  CHECK(labeler_from_string("rlhp") == Labeler::kOracleHard);
  CHECK_THROWS_AS(labeler_from_string("crowd"), ConfigError);
}

TEST_CASE("demo fraction range") {
  RunConfig c;
  c.demo_fraction = 0.5;
  CHECK_NOTHROW(validate(c));
  c.demo_fraction = 0.6;
  try {
    validate(c);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("supported range 0-0.5") != std::string::npos);
  }
  c.demo_fraction = -0.1;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("faithful budget limits labels per step") {
  RunConfig c;
  c.faithful_budget = true;
  c.total_steps = 100000;
  c.label_budget = 10;
  CHECK_NOTHROW(validate(c));
  c.label_budget = 11;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.labeler = Labeler::kTrueReward;
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("invalid fields are rejected") {
  RunConfig c;
  c.env = "walker";
  CHECK_THROWS(validate(c));
  c = RunConfig{};
  c.segment_length = 1000;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = RunConfig{};
  c.total_steps = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("text round trip keeps every key") {
  RunConfig c;
  c.env = "pendulum_swingup";
  c.seed = 99;
  c.synchronous = false;
  c.demo_fraction = 0.3;
  c.policy.hidden = {32, 16};
  c.reward.learning_rate = 3.5e-4;
  c.svr.epsilon = 0.02;
  const RunConfig back = config_from_text(config_to_text(c));
  for (const auto& key : config_keys()) {
    CHECK_MESSAGE(get_config_value(back, key) == get_config_value(c, key), key);
  }
  CHECK(config_to_text(back) == config_to_text(c));
}

TEST_CASE("config text parsing") {
  const auto c = config_from_text("# comment\n\nseed = 7\nlabeler=oracle_hard\n  mode = async \n");
  CHECK(c.seed == 7);
  CHECK(c.labeler == Labeler::kOracleHard);
  CHECK_FALSE(c.synchronous);
  try {
    config_from_text("seed = 1\nnot a pair\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    config_from_text("seed = 1\n\nbogus = 3\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_text("total_steps = many\n"), ConfigError);
  CHECK_THROWS_AS(config_from_text("mode = sometimes\n"), ConfigError);
}

TEST_CASE("set and get individual keys") {
  RunConfig c;
  set_config_value(c, "ppo.hidden", "16,8");
  CHECK(c.policy.hidden == std::vector<int>{16, 8});
  set_config_value(c, "reward.epochs", "3");
  CHECK(get_config_value(c, "reward.epochs") == "3");
  CHECK_THROWS_AS(set_config_value(c, "ppo.hidden", "16,-1"), ConfigError);
  CHECK_THROWS_AS(get_config_value(c, "nope"), ConfigError);
}

TEST_CASE("preset budgets") {
  CHECK(preset_label_budget(false) == 1400);
  CHECK(preset_label_budget(true) == 700);
}
