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

#include "prefscale/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prefscale/errors.hpp"

namespace prefscale {

void ScalingContext::insert_sorted(double value) {
  // upper_bound keeps equal values in insertion order.
  sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), value),
                 value);
}

void ScalingContext::erase_sorted(double value) {
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), value);
  if (it != sorted_.end() && *it == value) sorted_.erase(it);
}

void ScalingContext::add(double r_left, double r_right) {
  if (!std::isfinite(r_left) || !std::isfinite(r_right)) {
    throw ConfigError("scaling context accepts finite returns only");
  }
  insert_sorted(r_left);
  insert_sorted(r_right);
  if (window_sets_ == 0) return;
  history_.push_back(r_left);
  history_.push_back(r_right);
  while (history_.size() > 2 * window_sets_) {
    erase_sorted(history_.front());
    history_.pop_front();
  }
}

// ceil(p * N) with p = 10/100 and 90/100, in integer arithmetic.
double ScalingContext::lower() const {
  const std::size_t n = sorted_.size();
  const std::size_t rank = (n + 9) / 10;
  return sorted_.at(std::max<std::size_t>(rank, 1) - 1);
}

double ScalingContext::upper() const {
  const std::size_t n = sorted_.size();
  const std::size_t rank = (9 * n + 9) / 10;
  return sorted_.at(std::max<std::size_t>(rank, 1) - 1);
}

bool ScalingContext::degenerate() const {
  return sorted_.size() < 2 || !(upper() > lower());
}

ScalingContext update_context(ScalingContext ctx, double r_left,
                              double r_right) {
  ctx.add(r_left, r_right);
  return ctx;
}

double hard_preference(double r_left, double r_right) {
  if (r_left > r_right) return 1.0;
  if (r_left < r_right) return 0.0;
  return 0.5;
}

double scale_preference(const ScalingContext& ctx, double r_left,
                        double r_right) {
  if (ctx.degenerate()) return hard_preference(r_left, r_right);
  const double lo = ctx.lower();
  const double hi = ctx.upper();
  if (r_left > r_right) {
    const double norm = std::max(0.0, std::min((r_left - lo) / (hi - lo), 1.0));
    return 0.5 + 0.5 * norm;
  }
  if (r_left < r_right) {
    const double norm =
        std::max(0.0, std::min((r_right - lo) / (hi - lo), 1.0));
    return 0.5 - 0.5 * norm;
  }
  return 0.5;
}

std::string_view to_string(LabelSource source) {
  switch (source) {
    case LabelSource::kOracleScaled:
      return "oracle_scaled";
    case LabelSource::kOracleHard:
      return "oracle_hard";
    case LabelSource::kHumanUi:
      return "human_ui";
    case LabelSource::kEstimator:
      return "estimator";
  }
  return "unknown";
}

LabelSource label_source_from_string(std::string_view name) {
  if (name == "oracle_scaled") return LabelSource::kOracleScaled;
  if (name == "oracle_hard") return LabelSource::kOracleHard;
  if (name == "human_ui") return LabelSource::kHumanUi;
  if (name == "estimator") return LabelSource::kEstimator;
  throw ConfigError("unknown label source '" + std::string(name) + "'");
}

}  // namespace prefscale
