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

#ifndef PREFSCALE_LABEL_SERVICE_HPP_
#define PREFSCALE_LABEL_SERVICE_HPP_

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "prefscale/envlib.hpp"
#include "prefscale/trajectory.hpp"

namespace prefscale {

inline constexpr const char* kQuerySchema = "prefscale.query/v1";
inline constexpr const char* kSliderConvention =
    "z = 1.0: left clip absolutely preferred; z = 0.5: equal; "
    "z = 0.0: right clip absolutely preferred";

// What a labeller sees: two drawable traces and nothing about rewards.
struct QueryPayload {
  std::int64_t query_id = 0;
  std::string env;
  std::int64_t created_at_step = 0;
  std::vector<std::array<double, 2>> left_trace;
  std::vector<std::array<double, 2>> right_trace;
};

QueryPayload make_query_payload(const EnvSpec& spec, const Segment& left,
                                const Segment& right, std::int64_t step);
std::string query_payload_json(const QueryPayload& payload);

enum class SubmitResult { kAccepted, kOutOfRange, kUnknownOrStale };

// Hand-off between the elicitation worker and whoever answers over HTTP.
// A query is answered at most once: the first valid submission runs the
// query's callback and closes it; later ones, and any after a timeout, are
// refused as stale.
class LabelBroker {
 public:
  using AnswerFn = std::function<void(double z)>;

  // Returns the assigned query id. `on_answer` runs under the broker lock
  // when the label is accepted, before submit() returns.
  std::int64_t post(QueryPayload payload, AnswerFn on_answer);

  // Blocks until the query is answered or `timeout` passes. On timeout the
  // query is closed and nullopt returned.
  std::optional<double> wait(std::int64_t query_id,
                             std::chrono::duration<double> timeout);

  SubmitResult submit(std::int64_t query_id, double z);

  // JSON of the oldest unanswered query, if any.
  std::optional<std::string> oldest_pending() const;
  std::size_t pending_count() const;

  void set_active(bool active);
  bool active() const;
  // Wakes every waiter with no answer; used on shutdown.
  void close_all();

 private:
  struct Pending {
    QueryPayload payload;
    std::string json;
    AnswerFn on_answer;
    std::optional<double> answer;
    bool closed = false;
  };

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<Pending>> queue_;
  std::vector<std::pair<std::int64_t, std::shared_ptr<Pending>>> index_;
  std::int64_t next_id_ = 1;
  bool active_ = false;
};

struct StatusSnapshot {
  std::int64_t steps_done = 0;
  std::int64_t labels_done = 0;
  std::int64_t budget = 0;
  std::int64_t human_count = 0;
  std::int64_t estimator_count = 0;
  double latest_mean_return = 0.0;
};

std::string status_json(const StatusSnapshot& status);

class RunStatus {
 public:
  void set(const StatusSnapshot& status);
  void update(const std::function<void(StatusSnapshot&)>& fn);
  StatusSnapshot get() const;

 private:
  mutable std::mutex mu_;
  StatusSnapshot status_;
};

// JSON-over-HTTP front for a broker and a status cell:
//   GET  /api/query   200 payload | 204 nothing pending | 503 no active run
//   POST /api/label   {"query_id": n, "z": x} -> 200 | 400 | 409 | 422
//   GET  /api/status  200 status
// CORS is open so a locally served page can call it.
class LabelService {
 public:
  LabelService(LabelBroker& broker, RunStatus& status);
  ~LabelService();
  LabelService(const LabelService&) = delete;
  LabelService& operator=(const LabelService&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prefscale

#endif  // PREFSCALE_LABEL_SERVICE_HPP_
