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

// Helpers shared by the unit and acceptance suites. The naive labeller below
// is written directly from the scaling algorithm's pseudo-code, line by line,
// without reusing any library code.

#ifndef PREFSCALE_TESTS_SUPPORT_HPP_
#define PREFSCALE_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "prefscale/envlib.hpp"
#include "prefscale/numerics.hpp"
#include "prefscale/oracle.hpp"
#include "prefscale/trajectory.hpp"

namespace prefscale::testing {

// `history` is the flat reward list including the pair being labelled.
inline double naive_scale(std::vector<double> history, double r_left,
                          double r_right) {
  std::sort(history.begin(), history.end());
  const std::size_t n = history.size();
  auto hard = [&] {
    if (r_left > r_right) return 1.0;
    if (r_left < r_right) return 0.0;
    return 0.5;
  };
  if (n < 2) return hard();
  const auto i_min = static_cast<std::size_t>(std::ceil(10.0 * n / 100.0));
  const auto i_max = static_cast<std::size_t>(std::ceil(90.0 * n / 100.0));
  const double r_min = history[i_min - 1];
  const double r_max = history[i_max - 1];
  if (r_max == r_min) return hard();
  double z;
  if (r_left > r_right) {
    const double r_hat =
        std::max(0.0, std::min((r_left - r_min) / (r_max - r_min), 1.0));
    z = 0.5 + 0.5 * r_hat;
  } else if (r_left < r_right) {
    const double r_hat =
        std::max(0.0, std::min((r_right - r_min) / (r_max - r_min), 1.0));
    z = 0.5 - 0.5 * r_hat;
  } else {
    z = 0.5;
  }
  return z;
}

// A segment with random observations/actions and per-step rewards drawn
// uniformly from [reward_low, reward_high].
inline Segment random_segment(Rng& rng, int obs_dim, int act_dim,
                              std::size_t length, double reward_low = 0.0,
                              double reward_high = 1.0) {
  Segment s;
  for (std::size_t t = 0; t < length; ++t) {
    Transition tr;
    tr.observation = Vector(obs_dim);
    tr.action = Vector(act_dim);
    for (int i = 0; i < obs_dim; ++i) tr.observation[i] = rng.normal(0.0, 1.0);
    for (int i = 0; i < act_dim; ++i) tr.action[i] = rng.uniform(-1.0, 1.0);
    tr.true_reward = rng.uniform(reward_low, reward_high);
    tr.predicted_reward = rng.normal(0.0, 0.5);
    s.transitions.push_back(std::move(tr));
  }
  s.true_return = s.recompute_true_return();
  s.source_episode = static_cast<std::int64_t>(rng.index(1000));
  s.start_index = static_cast<std::int64_t>(rng.index(200));
  return s;
}

// Rolls out velocity_runner with a per-episode constant action bias plus
// noise, so that episodes cover slow, fast and reversing behaviour.
inline std::vector<Segment> runner_segments(std::uint64_t seed, int episodes,
                                            std::size_t length) {
  const EnvSpec spec = make_env_spec("velocity_runner");
  Rng rng(seed, StreamId::kEnvironment);
  std::vector<Segment> out;
  for (int e = 0; e < episodes; ++e) {
    auto [state, obs] = reset(spec, rng.next_u64());
    const double bias = rng.uniform(-1.0, 1.0);
    std::vector<Transition> episode;
    bool done = false;
    while (!done) {
      Vector a(1);
      a[0] = std::clamp(bias + rng.normal(0.0, 0.5), -1.0, 1.0);
      auto [next, result] = step(spec, state, a);
      episode.push_back({obs, a, result.true_reward, 0.0});
      state = std::move(next);
      obs = result.observation;
      done = result.done;
    }
    for (auto& s : extract_segments(episode, length, length, e)) {
      out.push_back(std::move(s));
    }
  }
  return out;
}

// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("prefscale_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace prefscale::testing

#endif  // PREFSCALE_TESTS_SUPPORT_HPP_
