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

#ifndef PREFSCALE_TRAJECTORY_HPP_
#define PREFSCALE_TRAJECTORY_HPP_

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefscale/numerics.hpp"

namespace prefscale {

struct Transition {
  Vector observation;
  Vector action;
  double true_reward = 0.0;       // oracle channel
  double predicted_reward = 0.0;  // raw reward-model output at collection
};

struct Segment {
  std::vector<Transition> transitions;
  double true_return = 0.0;
  std::int64_t source_episode = 0;
  std::int64_t start_index = 0;

  std::size_t length() const { return transitions.size(); }
  int obs_dim() const;
  int act_dim() const;
  double recompute_true_return() const;
  double predicted_return() const;

  // Stacks concat(observation, action) columns: (obs_dim + act_dim) x L.
  Matrix input_matrix() const;

  friend bool operator==(const Segment&, const Segment&);
};

bool operator==(const Transition& a, const Transition& b);

// Windows of exactly `length` transitions at offsets 0, stride, 2 stride, ...
// A trailing window that does not fit is dropped.
std::vector<Segment> extract_segments(const std::vector<Transition>& episode,
                                      std::size_t length, std::size_t stride,
                                      std::int64_t episode_id = 0);

// Bounded FIFO; the oldest segment is evicted on overflow.
class SegmentQueue {
 public:
  explicit SegmentQueue(std::size_t capacity = 512);

  void push(Segment segment);
  std::size_t size() const { return buffer_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t total_pushed() const { return total_pushed_; }
  std::uint64_t evicted() const { return evicted_; }
  const Segment& at(std::size_t i) const { return buffer_.at(i); }
  const std::deque<Segment>& buffer() const { return buffer_; }

 private:
  std::size_t capacity_;
  std::deque<Segment> buffer_;
  std::uint64_t total_pushed_ = 0;
  std::uint64_t evicted_ = 0;
};

// Two distinct queue positions drawn uniformly without replacement. Throws
// NotReady when fewer than two segments are queued.
std::pair<std::size_t, std::size_t> sample_pair_indices(std::size_t n,
                                                        Rng& rng);
std::pair<Segment, Segment> sample_pair(const SegmentQueue& queue, Rng& rng);

// Per segment: mean, population std, min and max over time of every
// observation and action dimension, then the mean per-step predicted reward.
// The left segment's block precedes the right segment's.
Vector segment_features(const Segment& segment);
Vector featurize_pair(const Segment& left, const Segment& right);
std::size_t pair_feature_dim(int obs_dim, int act_dim);
// Exchanges the two halves of a pair feature vector.
Vector swap_pair_features(const Vector& features);

// One segment per line: L obs_dim act_dim episode start true_return followed
// by L records of (observation..., action..., true_reward, predicted_reward).
// Doubles use the shortest round-trip representation.
std::string segment_to_line(const Segment& segment);
Segment segment_from_line(std::string_view line, std::size_t line_number = 0);

}  // namespace prefscale

#endif  // PREFSCALE_TRAJECTORY_HPP_
