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

#include "prefscale/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "prefscale/errors.hpp"
#include "prefscale/text_io.hpp"

namespace prefscale {

int Segment::obs_dim() const {
  return transitions.empty()
             ? 0
             : static_cast<int>(transitions.front().observation.size());
}

int Segment::act_dim() const {
  return transitions.empty()
             ? 0
             : static_cast<int>(transitions.front().action.size());
}

double Segment::recompute_true_return() const {
  double total = 0.0;
  for (const auto& t : transitions) total += t.true_reward;
  return total;
}

double Segment::predicted_return() const {
  double total = 0.0;
  for (const auto& t : transitions) total += t.predicted_reward;
  return total;
}

Matrix Segment::input_matrix() const {
  const int od = obs_dim();
  const int ad = act_dim();
  Matrix m(od + ad, static_cast<Eigen::Index>(transitions.size()));
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    m.col(col).head(od) = transitions[t].observation;
    m.col(col).tail(ad) = transitions[t].action;
  }
  return m;
}

bool operator==(const Transition& a, const Transition& b) {
  return a.observation == b.observation && a.action == b.action &&
         a.true_reward == b.true_reward &&
         a.predicted_reward == b.predicted_reward;
}

bool operator==(const Segment& a, const Segment& b) {
  return a.transitions == b.transitions && a.true_return == b.true_return &&
         a.source_episode == b.source_episode && a.start_index == b.start_index;
}

std::vector<Segment> extract_segments(const std::vector<Transition>& episode,
                                      std::size_t length, std::size_t stride,
                                      std::int64_t episode_id) {
  if (length == 0 || stride == 0) {
    throw ConfigError("segment length and stride must be positive");
  }
  std::vector<Segment> out;
  for (std::size_t start = 0; start + length <= episode.size();
       start += stride) {
    Segment seg;
    seg.transitions.assign(episode.begin() + static_cast<std::ptrdiff_t>(start),
                           episode.begin() +
                               static_cast<std::ptrdiff_t>(start + length));
    seg.true_return = seg.recompute_true_return();
    seg.source_episode = episode_id;
    seg.start_index = static_cast<std::int64_t>(start);
    out.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------

SegmentQueue::SegmentQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ < 2) throw ConfigError("segment queue capacity must be >= 2");
}

void SegmentQueue::push(Segment segment) {
  buffer_.push_back(std::move(segment));
  ++total_pushed_;
  if (buffer_.size() > capacity_) {
    buffer_.pop_front();
    ++evicted_;
  }
}

std::pair<std::size_t, std::size_t> sample_pair_indices(std::size_t n,
                                                        Rng& rng) {
  if (n < 2) {
    throw NotReady("need at least 2 queued segments, have " +
                   std::to_string(n));
  }
  const std::size_t first = rng.index(n);
  std::size_t second = rng.index(n - 1);
  if (second >= first) ++second;
  return {first, second};
}

std::pair<Segment, Segment> sample_pair(const SegmentQueue& queue, Rng& rng) {
  const auto [i, j] = sample_pair_indices(queue.size(), rng);
  return {queue.at(i), queue.at(j)};
}

// ---------------------------------------------------------------------------

std::size_t pair_feature_dim(int obs_dim, int act_dim) {
  return 2 * (4 * static_cast<std::size_t>(obs_dim + act_dim) + 1);
}

Vector segment_features(const Segment& segment) {
  if (segment.transitions.empty()) {
    throw ConfigError("cannot featurize an empty segment");
  }
  const Matrix m = segment.input_matrix();
  const auto d = m.rows();
  const double n = static_cast<double>(m.cols());
  Vector f(4 * d + 1);
  const Vector mean = m.rowwise().mean();
  const Vector var =
      (m.colwise() - mean).array().square().rowwise().sum() / n;
  f.segment(0, d) = mean;
  f.segment(d, d) = var.array().sqrt();
  f.segment(2 * d, d) = m.rowwise().minCoeff();
  f.segment(3 * d, d) = m.rowwise().maxCoeff();
  f[4 * d] = segment.predicted_return() / n;
  return f;
}

Vector featurize_pair(const Segment& left, const Segment& right) {
  if (left.obs_dim() != right.obs_dim() || left.act_dim() != right.act_dim()) {
    throw ConfigError("segments in a pair must share dimensions");
  }
  const Vector a = segment_features(left);
  const Vector b = segment_features(right);
  Vector out(a.size() + b.size());
  out << a, b;
  return out;
}

Vector swap_pair_features(const Vector& features) {
  const auto half = features.size() / 2;
  Vector out(features.size());
  out << features.tail(half), features.head(half);
  return out;
}

// ---------------------------------------------------------------------------

std::string segment_to_line(const Segment& segment) {
  std::string line;
  line.reserve(64 + segment.length() * 64);
  auto put = [&line](std::string_view token) {
    if (!line.empty()) line.push_back(' ');
    line.append(token);
  };
  put(std::to_string(segment.length()));
  put(std::to_string(segment.obs_dim()));
  put(std::to_string(segment.act_dim()));
  put(std::to_string(segment.source_episode));
  put(std::to_string(segment.start_index));
  put(format_double(segment.true_return));
  for (const auto& t : segment.transitions) {
    for (double x : t.observation) put(format_double(x));
    for (double x : t.action) put(format_double(x));
    put(format_double(t.true_reward));
    put(format_double(t.predicted_reward));
  }
  return line;
}

Segment segment_from_line(std::string_view line, std::size_t line_number) {
  const auto tokens = split_whitespace(line);
  if (tokens.size() < 6) {
    throw ParseError("segment record has too few fields", line_number);
  }
  const auto length = parse_int(tokens[0], line_number);
  const auto obs_dim = parse_int(tokens[1], line_number);
  const auto act_dim = parse_int(tokens[2], line_number);
  if (length < 0 || obs_dim < 0 || act_dim < 0) {
    throw ParseError("negative segment dimension", line_number);
  }
  const auto per_step = static_cast<std::size_t>(obs_dim + act_dim + 2);
  if (tokens.size() != 6 + static_cast<std::size_t>(length) * per_step) {
    throw ParseError("segment record has " + std::to_string(tokens.size()) +
                         " fields, expected " +
                         std::to_string(6 + length * per_step),
                     line_number);
  }
  Segment seg;
  seg.source_episode = parse_int(tokens[3], line_number);
  seg.start_index = parse_int(tokens[4], line_number);
  seg.true_return = parse_double(tokens[5], line_number);
  std::size_t k = 6;
  for (std::int64_t t = 0; t < length; ++t) {
    Transition tr;
    tr.observation.resize(obs_dim);
    tr.action.resize(act_dim);
    for (std::int64_t i = 0; i < obs_dim; ++i) {
      tr.observation[i] = parse_double(tokens[k++], line_number);
    }
    for (std::int64_t i = 0; i < act_dim; ++i) {
      tr.action[i] = parse_double(tokens[k++], line_number);
    }
    tr.true_reward = parse_double(tokens[k++], line_number);
    tr.predicted_reward = parse_double(tokens[k++], line_number);
    seg.transitions.push_back(std::move(tr));
  }
  return seg;
}

}  // namespace prefscale
