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

#include "prefscale/envlib.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "prefscale/errors.hpp"

namespace prefscale {
namespace {

constexpr double kRunnerAccel = 0.2;
constexpr double kRunnerMaxSpeed = 15.0;
constexpr double kRunnerDt = 0.05;

constexpr double kPendulumGravityOverLength = 10.0;
constexpr double kPendulumTorqueGain = 3.0;
constexpr double kPendulumDt = 0.05;
constexpr double kPendulumMaxSpeed = 8.0;

constexpr double kReacherDamping = 0.95;
constexpr double kReacherDt = 0.1;
constexpr double kReacherRadius = 0.1;

}  // namespace

EnvSpec make_env_spec(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  EnvSpec spec;
  spec.name = key;
  if (key == "velocity_runner") {
    spec.kind = EnvKind::kVelocityRunner;
    spec.obs_dim = 3;
    spec.act_dim = 1;
    spec.horizon = 200;
    spec.action_low = Vector::Constant(1, -1.0);
    spec.action_high = Vector::Constant(1, 1.0);
    spec.max_instant_reward = 1.0;
  } else if (key == "pendulum_swingup") {
    spec.kind = EnvKind::kPendulumSwingup;
    spec.obs_dim = 3;
    spec.act_dim = 1;
    spec.horizon = 200;
    spec.action_low = Vector::Constant(1, -2.0);
    spec.action_high = Vector::Constant(1, 2.0);
    spec.max_instant_reward = 0.0;
  } else if (key == "goal_reacher") {
    spec.kind = EnvKind::kGoalReacher;
    spec.obs_dim = 4;
    spec.act_dim = 2;
    spec.horizon = 300;
    spec.action_low = Vector::Constant(2, -1.0);
    spec.action_high = Vector::Constant(2, 1.0);
    spec.max_instant_reward = 1.0;
  } else {
    throw ConfigError("unknown environment '" + std::string(name) +
                      "' (expected velocity_runner, pendulum_swingup or "
                      "goal_reacher)");
  }
  return spec;
}

double velocity_runner_reward(double velocity) {
  return std::max(0.0, std::min(velocity / 10.0, 1.0));
}

double wrap_angle(double theta) {
  constexpr double kPi = std::numbers::pi;
  double wrapped = std::fmod(theta + kPi, 2.0 * kPi);
  if (wrapped < 0.0) wrapped += 2.0 * kPi;
  wrapped -= kPi;
  // fmod maps +pi to -pi; the range is (-pi, pi].
  return wrapped == -kPi ? kPi : wrapped;
}

Vector clamp_action(const EnvSpec& spec, const Vector& action) {
  if (action.size() != spec.act_dim) {
    throw ConfigError("action has " + std::to_string(action.size()) +
                      " entries, expected " + std::to_string(spec.act_dim));
  }
  return action.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

Vector observe(const EnvSpec& spec, const EnvState& state) {
  const Vector& s = state.physical;
  switch (spec.kind) {
    case EnvKind::kVelocityRunner:
      return Vector{{s[1], std::sin(s[0]), std::cos(s[0])}};
    case EnvKind::kPendulumSwingup:
      return Vector{{std::cos(s[0]), std::sin(s[0]), s[1]}};
    case EnvKind::kGoalReacher:
      return Vector{{s[0] - s[4], s[1] - s[5], s[2], s[3]}};
  }
  throw ConfigError("unhandled environment kind");
}

std::pair<EnvState, Vector> reset(const EnvSpec& spec, std::uint64_t seed) {
  Rng rng(seed, StreamId::kEnvironment);
  EnvState state;
  state.step_index = 0;
  state.last_action = Vector::Zero(spec.act_dim);
  switch (spec.kind) {
    case EnvKind::kVelocityRunner:
      state.physical = Vector{{rng.uniform(-0.1, 0.1), 0.0}};
      break;
    case EnvKind::kPendulumSwingup:
      state.physical = Vector{
          {std::numbers::pi + rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)}};
      break;
    case EnvKind::kGoalReacher: {
      const double px = rng.uniform(-1.0, 1.0);
      const double py = rng.uniform(-1.0, 1.0);
      const double gx = rng.uniform(-1.0, 1.0);
      const double gy = rng.uniform(-1.0, 1.0);
      state.physical = Vector{{px, py, 0.0, 0.0, gx, gy}};
      break;
    }
  }
  Vector obs = observe(spec, state);
  return {std::move(state), std::move(obs)};
}

std::pair<EnvState, StepResult> step(const EnvSpec& spec, const EnvState& state,
                                     const Vector& action) {
  if (state.step_index >= spec.horizon) {
    throw RuntimeError("step called on a finished episode");
  }
  const Vector a = clamp_action(spec, action);
  EnvState next = state;
  next.last_action = a;
  Vector& s = next.physical;
  double reward = 0.0;
  switch (spec.kind) {
    case EnvKind::kVelocityRunner: {
      s[1] = std::clamp(s[1] + kRunnerAccel * a[0], -kRunnerMaxSpeed,
                        kRunnerMaxSpeed);
      s[0] += kRunnerDt * s[1];
      reward = velocity_runner_reward(s[1]);
      break;
    }
    case EnvKind::kPendulumSwingup: {
      const double accel =
          -kPendulumGravityOverLength * std::sin(s[0] - std::numbers::pi) +
          kPendulumTorqueGain * a[0];
      s[1] = std::clamp(s[1] + kPendulumDt * accel, -kPendulumMaxSpeed,
                        kPendulumMaxSpeed);
      s[0] += kPendulumDt * s[1];
      const double theta = wrap_angle(s[0]);
      reward = -(theta * theta + 0.1 * s[1] * s[1] + 0.001 * a[0] * a[0]);
      break;
    }
    case EnvKind::kGoalReacher: {
      s[2] = kReacherDamping * s[2] + kReacherDt * a[0];
      s[3] = kReacherDamping * s[3] + kReacherDt * a[1];
      s[0] += kReacherDt * s[2];
      s[1] += kReacherDt * s[3];
      const double dist = std::hypot(s[0] - s[4], s[1] - s[5]);
      reward = dist < kReacherRadius ? 1.0 : 0.0;
      break;
    }
  }
  ++next.step_index;
  StepResult result;
  result.observation = observe(spec, next);
  result.true_reward = reward;
  result.done = next.step_index == spec.horizon;
  return {std::move(next), std::move(result)};
}

std::array<double, 2> drawable_frame(const EnvSpec& spec,
                                     const Vector& observation) {
  switch (spec.kind) {
    case EnvKind::kVelocityRunner:
      // Position on a unit circular track.
      return {observation[1], observation[2]};
    case EnvKind::kPendulumSwingup:
      // Pole tip with the pivot at the origin, upright is +y.
      return {observation[1], observation[0]};
    case EnvKind::kGoalReacher:
      // Position relative to the goal.
      return {observation[0], observation[1]};
  }
  return {0.0, 0.0};
}

double analytic_max_return(const EnvSpec& spec) {
  if (spec.kind != EnvKind::kVelocityRunner) {
    throw ConfigError("no closed-form maximum return for " + spec.name);
  }
  double v = 0.0;
  double total = 0.0;
  for (int t = 0; t < spec.horizon; ++t) {
    v = std::min(v + kRunnerAccel, kRunnerMaxSpeed);
    total += velocity_runner_reward(v);
  }
  return total;
}

}  // namespace prefscale
