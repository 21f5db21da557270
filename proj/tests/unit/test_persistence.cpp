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

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "prefscale/errors.hpp"
#include "prefscale/persistence.hpp"
#include "prefscale/text_io.hpp"
#include "support.hpp"

using namespace prefscale;
using prefscale::testing::random_segment;
using prefscale::testing::scratch_dir;

namespace {

std::vector<PreferenceRecord> random_records(std::uint64_t seed, int n) {
  Rng rng(seed, StreamId::kEnvironment);
  const LabelSource sources[] = {LabelSource::kOracleScaled, LabelSource::kOracleHard,
                                 LabelSource::kHumanUi, LabelSource::kEstimator};
  std::vector<PreferenceRecord> out;
  for (int i = 0; i < n; ++i) {
    PreferenceRecord r;
    r.left = random_segment(rng, 3, 1, 25, -1.0, 1.0);
    r.right = random_segment(rng, 3, 1, 25, -1.0, 1.0);
    r.z_hat = rng.uniform(0.0, 1.0);
    r.source = sources[rng.index(4)];
    r.timestep = static_cast<std::int64_t>(rng.index(100000));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

TEST_CASE("empty database round-trips") {
  const auto dir = scratch_dir("persist_empty");
  save_preference_db(dir + "/db.txt", {});
  CHECK(load_preference_db(dir + "/db.txt").empty());
}

TEST_CASE("random records round-trip exactly") {
  const auto dir = scratch_dir("persist_records");
  const auto records = random_records(1, 100);
  save_preference_db(dir + "/db.txt", records);
  const auto back = load_preference_db(dir + "/db.txt");
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) CHECK(back[i] == records[i]);
}

TEST_CASE("extreme doubles survive the text format") {
  auto records = random_records(2, 1);
  records[0].left.transitions[0].true_reward = 1e-300;
  records[0].left.transitions[1].true_reward = -1.7976931348623157e308;
  records[0].left.transitions[2].predicted_reward = 0.1 + 0.2;
  records[0].z_hat = 1.0 / 3.0;
  const auto back = preference_db_from_text(preference_db_to_text(records));
  CHECK(back[0] == records[0]);
}

TEST_CASE("truncated database names the offending line") {
  const auto text = preference_db_to_text(random_records(3, 5));
  const auto cut = text.substr(0, text.size() - 40);
  const auto lines = static_cast<std::size_t>(std::count(cut.begin(), cut.end(), '\n'));
  try {
    preference_db_from_text(cut);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == lines + 1);
    CHECK(std::string(e.what()).find("line " + std::to_string(lines + 1)) != std::string::npos);
  }
}

TEST_CASE("malformed records are rejected") {
  auto line = preference_record_to_line(random_records(4, 1)[0]);
  CHECK_THROWS_AS(preference_record_from_line("0.5\toracle_scaled\t3", 2), ParseError);
  auto bad_z = line;
  bad_z.replace(0, bad_z.find('\t'), "1.5");
  CHECK_THROWS_AS(preference_record_from_line(bad_z, 1), ParseError);
  auto bad_source = line;
  const auto t1 = bad_source.find('\t');
  const auto t2 = bad_source.find('\t', t1 + 1);
  bad_source.replace(t1 + 1, t2 - t1 - 1, "nobody");
  CHECK_THROWS_AS(preference_record_from_line(bad_source, 1), ParseError);
}

TEST_CASE("policy checkpoint round-trips") {
  const auto dir = scratch_dir("persist_policy");
  Rng rng(5, StreamId::kInit);
  PolicyConfig config;
  config.hidden = {16, 8};
  config.activation = Activation::kRelu;
  const Policy pol = make_policy(3, 2, config, rng);
  save_policy(dir + "/p.ckpt", pol.params);
  CHECK(load_policy(dir + "/p.ckpt") == pol.params);
}

TEST_CASE("reward checkpoint round-trips with normalization state") {
  const auto dir = scratch_dir("persist_reward");
  Rng rng(6, StreamId::kInit);
  RewardModelConfig config;
  config.hidden = {8};
  auto model = make_reward_predictor(4, 1, config, rng);
  model.net.values().setRandom();
  for (int i = 0; i < 150; ++i) observe_prediction(model, rng.normal(1.0, 2.0));
  save_reward_model(dir + "/r.ckpt", model);
  const auto back = load_reward_model(dir + "/r.ckpt");
  CHECK(back.net == model.net);
  CHECK(back.obs_dim == 4);
  CHECK(back.act_dim == 1);
  CHECK(back.norm_warmup == model.norm_warmup);
  CHECK(back.output_norm.count() == model.output_norm.count());
  CHECK(back.output_norm.mean() == model.output_norm.mean());
  CHECK(back.output_norm.variance() == doctest::Approx(model.output_norm.variance()).epsilon(1e-15));
  const Vector o = Vector::Ones(4), a = Vector::Ones(1);
  CHECK(normalized_reward(back, o, a).value ==
        doctest::Approx(normalized_reward(model, o, a).value).epsilon(1e-14));
}

TEST_CASE("corrupt checkpoints are reported") {
  const auto dir = scratch_dir("persist_corrupt");
  Rng rng(7, StreamId::kInit);
  const Policy pol = make_policy(3, 1, PolicyConfig{}, rng);
  save_policy(dir + "/p.ckpt", pol.params);
  const auto full = read_file(dir + "/p.ckpt");
  write_file(dir + "/cut.ckpt", full.substr(0, full.size() / 2));
  CHECK_THROWS_AS(load_policy(dir + "/cut.ckpt"), ParseError);
  CHECK_THROWS_AS(load_reward_model(dir + "/p.ckpt"), ParseError);
  write_file(dir + "/empty.ckpt", "");
  CHECK_THROWS_AS(load_policy(dir + "/empty.ckpt"), ParseError);
  CHECK_THROWS(load_policy(dir + "/missing.ckpt"));
}
