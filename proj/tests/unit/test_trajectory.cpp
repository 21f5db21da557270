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

#include <map>

#include "doctest.h"
#include "prefscale/errors.hpp"
#include "prefscale/trajectory.hpp"
#include "support.hpp"

using namespace prefscale;
using prefscale::testing::random_segment;

namespace {

std::vector<Transition> episode_of(std::size_t n) {
  std::vector<Transition> ep;
  for (std::size_t t = 0; t < n; ++t) {
    ep.push_back({Vector::Constant(2, static_cast<double>(t)), Vector::Constant(1, 0.5),
                  static_cast<double>(t) * 0.1, 0.0});
  }
  return ep;
}

}  // namespace

TEST_CASE("extract_segments offsets and drop rule") {
  CHECK(extract_segments(episode_of(25), 25, 25).size() == 1);
  const auto four = extract_segments(episode_of(100), 25, 25, 7);
  REQUIRE(four.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(four[k].start_index == static_cast<std::int64_t>(25 * k));
    CHECK(four[k].source_episode == 7);
    CHECK(four[k].length() == 25);
  }
  // Offsets 0 and 20 fit; 40 would need 65 steps.
  const auto two = extract_segments(episode_of(60), 25, 20);
  REQUIRE(two.size() == 2);
  CHECK(two[1].start_index == 20);
  CHECK(extract_segments(episode_of(10), 25, 25).empty());
}

TEST_CASE("segment true return equals the sum of its rewards") {
  const auto segs = extract_segments(episode_of(50), 25, 25);
  double expected = 0.0;
  for (int t = 25; t < 50; ++t) expected += t * 0.1;
  CHECK(segs[1].true_return == doctest::Approx(expected).epsilon(1e-14));
  CHECK(segs[1].true_return == segs[1].recompute_true_return());
}

TEST_CASE("queue is a bounded FIFO") {
  SegmentQueue q(3);
  Rng rng(1, StreamId::kEnvironment);
  for (int i = 0; i < 5; ++i) {
    Segment s = random_segment(rng, 2, 1, 4);
    s.source_episode = i;
    q.push(s);
    CHECK(q.size() <= 3);
    CHECK(q.total_pushed() - q.evicted() == q.size());
  }
  CHECK(q.at(0).source_episode == 2);
  CHECK(q.at(2).source_episode == 4);
}

TEST_CASE("sample_pair needs two segments") {
  SegmentQueue q(4);
  Rng rng(1, StreamId::kQuerySelection);
  CHECK_THROWS_AS(sample_pair(q, rng), NotReady);
  Rng seg_rng(2, StreamId::kEnvironment);
  q.push(random_segment(seg_rng, 1, 1, 3));
  CHECK_THROWS_AS(sample_pair(q, rng), NotReady);
  q.push(random_segment(seg_rng, 1, 1, 3));
  auto [a, b] = sample_pair(q, rng);
  CHECK_FALSE(a == b);
}

TEST_CASE("sample_pair is deterministic") {
  Rng a(5, StreamId::kQuerySelection), b(5, StreamId::kQuerySelection);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_pair_indices(10, a) == sample_pair_indices(10, b));
  }
}

TEST_CASE("pairs are uniform over unordered pairs") {
  // 45 unordered pairs of a 10-element queue; chi-square with 44 degrees of
  // freedom stays below 80 far beyond the 0.999 quantile (~78.7) in practice.
  Rng rng(12, StreamId::kQuerySelection);
  std::map<std::pair<std::size_t, std::size_t>, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto [x, y] = sample_pair_indices(10, rng);
    REQUIRE(x != y);
    counts[{std::min(x, y), std::max(x, y)}]++;
  }
  CHECK(counts.size() == 45);
  const double expected = draws / 45.0;
  const double sigma = std::sqrt(expected * (1.0 - 1.0 / 45.0));
  double chi2 = 0.0;
  for (const auto& [pair, c] : counts) {
    CHECK(std::abs(c - expected) <= 3.5 * sigma);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 80.0);
}

TEST_CASE("features of a constant segment") {
  Segment s;
  for (int t = 0; t < 5; ++t) s.transitions.push_back({Vector::Constant(2, 3.0), Vector::Zero(1), 0.0, 0.0});
  const Vector f = segment_features(s);
  const int d = 3;
  CHECK(f.size() == 4 * d + 1);
  CHECK(f.segment(0, d) == Vector{{3.0, 3.0, 0.0}});
  CHECK(f.segment(d, d).isZero(0.0));
  CHECK(f.segment(2 * d, d) == Vector{{3.0, 3.0, 0.0}});
  CHECK(f.segment(3 * d, d) == Vector{{3.0, 3.0, 0.0}});
}

TEST_CASE("features use population statistics") {
  Segment s;
  s.transitions.push_back({Vector::Constant(1, 1.0), Vector::Zero(1), 0.0, 0.5});
  s.transitions.push_back({Vector::Constant(1, 3.0), Vector::Zero(1), 0.0, 1.5});
  const Vector f = segment_features(s);
  // Layout: mean(obs, act), std, min, max, then mean predicted reward.
  CHECK(f[0] == 2.0);
  CHECK(f[2] == 1.0);
  CHECK(f[4] == 1.0);
  CHECK(f[6] == 3.0);
  CHECK(f[8] == 1.0);
}

TEST_CASE("pair features swap halves exactly") {
  Rng rng(4, StreamId::kEnvironment);
  const Segment a = random_segment(rng, 3, 1, 25);
  const Segment b = random_segment(rng, 3, 1, 25);
  const Vector ab = featurize_pair(a, b);
  const Vector ba = featurize_pair(b, a);
  CHECK(static_cast<std::size_t>(ab.size()) == pair_feature_dim(3, 1));
  CHECK(pair_feature_dim(3, 1) == 2 * (4 * 4 + 1));
  CHECK(swap_pair_features(ab) == ba);
  CHECK(ab.allFinite());
  CHECK_THROWS_AS(featurize_pair(a, random_segment(rng, 2, 1, 25)), ConfigError);
}

TEST_CASE("segment lines round-trip") {
  Rng rng(6, StreamId::kEnvironment);
  for (int i = 0; i < 20; ++i) {
    const Segment s = random_segment(rng, 1 + i % 4, 1 + i % 2, 1 + i);
    CHECK(segment_from_line(segment_to_line(s)) == s);
  }
  CHECK_THROWS_AS(segment_from_line("3 1 1 0 0 1.0 0.5", 4), ParseError);
  try {
    segment_from_line("2 1 1 0 0 x", 9);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 9);
  }
}
