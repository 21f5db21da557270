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

#ifndef PREFSCALE_ORACLE_HPP_
#define PREFSCALE_ORACLE_HPP_

#include <cstdint>
#include <deque>
#include <string_view>
#include <vector>

#include "prefscale/trajectory.hpp"

namespace prefscale {

// Synthetic preference labels. A label z lies in [0, 1]: 1 means the left
// segment is absolutely preferred, 0 the right one, 0.5 no preference, and
// values in between are weak preferences.

// The accumulated list of per-segment true returns from every labelled pair,
// kept sorted ascending. The lower bound is the ceil(0.1 N)-th and the upper
// bound the ceil(0.9 N)-th element (1-indexed), which trims the lowest and
// highest 10% of returns.
class ScalingContext {
 public:
  // `window_sets` > 0 keeps only the most recent that many (left, right)
  // pairs; 0 keeps everything.
  explicit ScalingContext(std::size_t window_sets = 0)
      : window_sets_(window_sets) {}

  void add(double r_left, double r_right);

  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }
  // Only meaningful when size() > 0.
  double lower() const;
  double upper() const;
  // True when the bounds cannot normalize: fewer than two returns or
  // lower() == upper().
  bool degenerate() const;

 private:
  void insert_sorted(double value);
  void erase_sorted(double value);

  std::size_t window_sets_;
  std::vector<double> sorted_;
  std::deque<double> history_;
};

ScalingContext update_context(ScalingContext ctx, double r_left,
                              double r_right);

// Scaled label. A strict winner gets 0.5 +/- 0.5 * its return normalized by
// the context bounds and clamped to [0, 1]; ties get 0.5. On a degenerate
// context this returns hard_preference().
double scale_preference(const ScalingContext& ctx, double r_left,
                        double r_right);

// 1 if left wins, 0 if right wins, 0.5 on a tie.
double hard_preference(double r_left, double r_right);

enum class LabelSource { kOracleScaled, kOracleHard, kHumanUi, kEstimator };

std::string_view to_string(LabelSource source);
LabelSource label_source_from_string(std::string_view name);

struct PreferenceRecord {
  Segment left;
  Segment right;
  double z_hat = 0.5;
  LabelSource source = LabelSource::kOracleScaled;
  std::int64_t timestep = 0;

  friend bool operator==(const PreferenceRecord&,
                         const PreferenceRecord&) = default;
};

}  // namespace prefscale

#endif  // PREFSCALE_ORACLE_HPP_
