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

#include "prefscale/persistence.hpp"

#include <bit>
#include <cstring>

#include "json.hpp"
#include "prefscale/errors.hpp"
#include "prefscale/text_io.hpp"

namespace prefscale {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::string_view kCheckpointFormat = "prefscale-checkpoint";
constexpr std::string_view kDbHeader = "# prefscale preference database v1";

using nlohmann::json;

const char* activation_tag(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_tag(const std::string& tag) {
  if (tag == "tanh") return Activation::kTanh;
  if (tag == "relu") return Activation::kRelu;
  if (tag == "identity") return Activation::kIdentity;
  throw ParseError("checkpoint: unknown activation '" + tag + "'", 0);
}

json mlp_header(const std::string& name, const MlpParams& params) {
  json layers = json::array();
  for (const auto& l : params.layers()) {
    layers.push_back({l.in_dim, l.out_dim, activation_tag(l.activation)});
  }
  return {{"name", name}, {"layers", layers}, {"size", params.size()}};
}

MlpParams mlp_from_header(const json& tensor) {
  std::vector<LayerShape> layers;
  for (const auto& l : tensor.at("layers")) {
    layers.push_back({l.at(0).get<int>(), l.at(1).get<int>(),
                      activation_from_tag(l.at(2).get<std::string>())});
  }
  return MlpParams(std::move(layers));
}

struct CheckpointWriter {
  json header;
  std::string data;

  explicit CheckpointWriter(std::string_view kind) {
    header = {{"format", kCheckpointFormat},
              {"version", 1},
              {"kind", kind},
              {"tensors", json::array()},
              {"meta", json::object()}};
  }

  void append(const Vector& values) {
    const auto bytes = static_cast<std::size_t>(values.size()) * sizeof(double);
    const std::size_t old = data.size();
    data.resize(old + bytes);
    if (bytes > 0) std::memcpy(data.data() + old, values.data(), bytes);
  }

  void add_mlp(const std::string& name, const MlpParams& params) {
    header["tensors"].push_back(mlp_header(name, params));
    append(params.values());
  }

  void add_vector(const std::string& name, const Vector& values) {
    header["tensors"].push_back({{"name", name}, {"size", values.size()}});
    append(values);
  }

  void save(const std::string& path) const {
    write_file(path, header.dump() + "\n" + data);
  }
};

struct CheckpointReader {
  json header;
  std::string data;
  std::size_t cursor = 0;
  std::size_t tensor = 0;

  CheckpointReader(const std::string& path, std::string_view kind) {
    std::string contents = read_file(path);
    const auto nl = contents.find('\n');
    if (nl == std::string::npos) {
      throw ParseError("checkpoint " + path + ": missing header line", 1);
    }
    try {
      header = json::parse(contents.substr(0, nl));
    } catch (const json::exception& e) {
      throw ParseError("checkpoint " + path + ": bad header: " + e.what(), 1);
    }
    if (header.value("format", "") != kCheckpointFormat ||
        header.value("kind", "") != kind) {
      throw ParseError("checkpoint " + path + " is not a " + std::string(kind) +
                           " checkpoint",
                       1);
    }
    data = contents.substr(nl + 1);
  }

  const json& next_tensor(const std::string& name) {
    const auto& tensors = header.at("tensors");
    if (tensor >= tensors.size() ||
        tensors[tensor].value("name", "") != name) {
      throw ParseError("checkpoint: expected tensor '" + name + "'", 0);
    }
    return tensors[tensor++];
  }

  void read_into(double* out, std::size_t count) {
    const std::size_t bytes = count * sizeof(double);
    if (cursor + bytes > data.size()) {
      throw ParseError("checkpoint: data section is truncated", 0);
    }
    if (bytes > 0) std::memcpy(out, data.data() + cursor, bytes);
    cursor += bytes;
  }

  MlpParams mlp(const std::string& name) {
    const json& t = next_tensor(name);
    MlpParams params = mlp_from_header(t);
    if (t.at("size").get<std::size_t>() != params.size()) {
      throw ParseError("checkpoint: size of '" + name + "' disagrees with layers", 0);
    }
    read_into(params.values().data(), params.size());
    return params;
  }

  Vector vector(const std::string& name) {
    const json& t = next_tensor(name);
    Vector v(t.at("size").get<Eigen::Index>());
    read_into(v.data(), static_cast<std::size_t>(v.size()));
    return v;
  }

  void finish() const {
    if (cursor != data.size()) {
      throw ParseError("checkpoint: trailing bytes after the last tensor", 0);
    }
  }
};

}  // namespace

void save_policy(const std::string& path, const PolicyParams& policy) {
  CheckpointWriter w("policy");
  w.add_mlp("actor", policy.actor);
  w.add_vector("log_std", policy.log_std);
  w.add_mlp("critic", policy.critic);
  w.save(path);
}

PolicyParams load_policy(const std::string& path) {
  try {
    CheckpointReader r(path, "policy");
    PolicyParams p;
    p.actor = r.mlp("actor");
    p.log_std = r.vector("log_std");
    p.critic = r.mlp("critic");
    r.finish();
    if (p.log_std.size() != p.actor.output_dim() ||
        p.critic.input_dim() != p.actor.input_dim()) {
      throw ParseError("checkpoint: inconsistent policy shapes", 0);
    }
    return p;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what(), 0);
  }
}

void save_reward_model(const std::string& path, const RewardPredictor& model) {
  CheckpointWriter w("reward_model");
  w.header["meta"] = {{"obs_dim", model.obs_dim},
                      {"act_dim", model.act_dim},
                      {"norm_warmup", model.norm_warmup},
                      {"norm_count", model.output_norm.count()}};
  w.add_mlp("net", model.net);
  w.add_vector("norm", Vector{{model.output_norm.mean(),
                               model.output_norm.variance()}});
  w.save(path);
}

RewardPredictor load_reward_model(const std::string& path) {
  try {
    CheckpointReader r(path, "reward_model");
    RewardPredictor model;
    const json& meta = r.header.at("meta");
    model.obs_dim = meta.at("obs_dim").get<int>();
    model.act_dim = meta.at("act_dim").get<int>();
    model.norm_warmup = meta.at("norm_warmup").get<int>();
    model.net = r.mlp("net");
    const Vector norm = r.vector("norm");
    r.finish();
    if (norm.size() != 2 ||
        model.net.input_dim() != model.obs_dim + model.act_dim) {
      throw ParseError("checkpoint: inconsistent reward model shapes", 0);
    }
    model.output_norm = RunningStats::from_moments(
        meta.at("norm_count").get<std::int64_t>(), norm[0], norm[1]);
    model.optimizer = AdamState::for_size(model.net.size(), 1e-4);
    return model;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what(), 0);
  }
}

// ---------------------------------------------------------------------------

std::string preference_record_to_line(const PreferenceRecord& record) {
  std::string line = format_double(record.z_hat);
  line += '\t';
  line += to_string(record.source);
  line += '\t';
  line += std::to_string(record.timestep);
  line += '\t';
  line += segment_to_line(record.left);
  line += '\t';
  line += segment_to_line(record.right);
  return line;
}

PreferenceRecord preference_record_from_line(std::string_view line,
                                             std::size_t line_number) {
  const auto fields = split(line, '\t');
  if (fields.size() != 5) {
    throw ParseError("preference record has " + std::to_string(fields.size()) +
                         " fields, expected 5",
                     line_number);
  }
  PreferenceRecord r;
  r.z_hat = parse_double(fields[0], line_number);
  if (!(r.z_hat >= 0.0 && r.z_hat <= 1.0)) {
    throw ParseError("preference label outside [0, 1]", line_number);
  }
  try {
    r.source = label_source_from_string(fields[1]);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), line_number);
  }
  r.timestep = parse_int(fields[2], line_number);
  r.left = segment_from_line(fields[3], line_number);
  r.right = segment_from_line(fields[4], line_number);
  return r;
}

std::string preference_db_to_text(
    const std::vector<PreferenceRecord>& records) {
  std::string text(kDbHeader);
  text += '\n';
  for (const auto& r : records) {
    text += preference_record_to_line(r);
    text += '\n';
  }
  return text;
}

std::vector<PreferenceRecord> preference_db_from_text(std::string_view text) {
  std::vector<PreferenceRecord> records;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    ++line_number;
    if (end == std::string_view::npos) {
      // A final line without its newline was cut short.
      throw ParseError("truncated record (missing end of line)", line_number);
    }
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    records.push_back(preference_record_from_line(line, line_number));
  }
  return records;
}

void save_preference_db(const std::string& path,
                        const std::vector<PreferenceRecord>& records) {
  write_file(path, preference_db_to_text(records));
}

std::vector<PreferenceRecord> load_preference_db(const std::string& path) {
  return preference_db_from_text(read_file(path));
}

}  // namespace prefscale
