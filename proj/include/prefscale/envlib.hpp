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

#ifndef PREFSCALE_ENVLIB_HPP_
#define PREFSCALE_ENVLIB_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "prefscale/numerics.hpp"

namespace prefscale {

// Small continuous-control tasks.
//
//  velocity_runner  1-D double integrator. state (x, v), action a in [-1, 1].
//                   v' = clamp(v + 0.2 a, -15, 15), x' = x + 0.05 v'.
//                   observation (v, sin x, cos x), reward max(0, min(v'/10, 1)).
//                   horizon 200.
//  pendulum_swingup state (theta, omega), torque a in [-2, 2].
//                   omega' = clamp(omega + 0.05 (10 sin theta + 3 a), -8, 8),
//                   theta' = theta + 0.05 omega'. theta = 0 is upright.
//                   observation (cos theta, sin theta, omega),
//                   reward -(wrap(theta)^2 + 0.1 omega^2 + 0.001 a^2).
//                   horizon 200.
//  goal_reacher     2-D point mass, state (px, py, vx, vy, gx, gy),
//                   acceleration a in [-1, 1]^2. v' = 0.95 v + 0.1 a,
//                   p' = p + 0.1 v'. observation (p - g, v), reward 1 when
//                   |p' - g| < 0.1 else 0. horizon 300.
enum class EnvKind { kVelocityRunner, kPendulumSwingup, kGoalReacher };

struct EnvSpec {
  EnvKind kind = EnvKind::kVelocityRunner;
  std::string name;
  int obs_dim = 0;
  int act_dim = 0;
  int horizon = 0;
  Vector action_low;
  Vector action_high;
  // Largest instantaneous true reward (upper bound for return checks).
  double max_instant_reward = 0.0;
};

// Accepts both "velocity_runner" and "velocity-runner" spellings.
EnvSpec make_env_spec(std::string_view name);

struct EnvState {
  Vector physical;
  int step_index = 0;
  Vector last_action;
};

struct StepResult {
  Vector observation;
  double true_reward = 0.0;
  bool done = false;
};

std::pair<EnvState, Vector> reset(const EnvSpec& spec, std::uint64_t seed);
std::pair<EnvState, StepResult> step(const EnvSpec& spec, const EnvState& state,
                                     const Vector& action);

Vector observe(const EnvSpec& spec, const EnvState& state);
Vector clamp_action(const EnvSpec& spec, const Vector& action);

double velocity_runner_reward(double velocity);
// Maps an angle to (-pi, pi].
double wrap_angle(double theta);

// A 2-D drawable point for one observation, used for UI playback.
std::array<double, 2> drawable_frame(const EnvSpec& spec,
                                     const Vector& observation);

// Return of the best open-loop behaviour, where it is known in closed form.
// Only velocity_runner has one (full throttle from rest).
double analytic_max_return(const EnvSpec& spec);

}  // namespace prefscale

#endif  // PREFSCALE_ENVLIB_HPP_
