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

#ifndef PREFSCALE_PERSISTENCE_HPP_
#define PREFSCALE_PERSISTENCE_HPP_

#include <string>
#include <string_view>
#include <vector>

#include "prefscale/oracle.hpp"
#include "prefscale/policy.hpp"
#include "prefscale/reward_model.hpp"

namespace prefscale {

// Checkpoint files: one JSON header line, a newline, then every tensor's
// float64 values little-endian in header order. MLP tensors list their
// layers as [in_dim, out_dim, activation] and store each layer's weights
// row-major followed by its biases.
//
//   {"format":"prefscale-checkpoint","version":1,"kind":"policy",
//    "tensors":[{"name":"actor","layers":[[3,64,"tanh"],...],"size":4481},
//               {"name":"log_std","size":1}, ...],
//    "meta":{...}}

void save_policy(const std::string& path, const PolicyParams& policy);
PolicyParams load_policy(const std::string& path);

// Stores the network plus the output-normalization statistics.
void save_reward_model(const std::string& path, const RewardPredictor& model);
RewardPredictor load_reward_model(const std::string& path);

// Preference database: a '#' header line, then one record per line with
// tab-separated fields
//   z_hat  source  timestep  left_segment  right_segment
// where the segments use segment_to_line(). Segment provenance (episode,
// start index) travels inside the segment fields.
std::string preference_record_to_line(const PreferenceRecord& record);
PreferenceRecord preference_record_from_line(std::string_view line,
                                             std::size_t line_number);

std::string preference_db_to_text(const std::vector<PreferenceRecord>& records);
std::vector<PreferenceRecord> preference_db_from_text(std::string_view text);

void save_preference_db(const std::string& path,
                        const std::vector<PreferenceRecord>& records);
std::vector<PreferenceRecord> load_preference_db(const std::string& path);

}  // namespace prefscale

#endif  // PREFSCALE_PERSISTENCE_HPP_
