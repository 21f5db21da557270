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

#include "prefscale/label_service.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "prefscale/errors.hpp"

namespace prefscale {

using nlohmann::json;

QueryPayload make_query_payload(const EnvSpec& spec, const Segment& left,
                                const Segment& right, std::int64_t step) {
  QueryPayload p;
  p.env = spec.name;
  p.created_at_step = step;
  for (const auto& t : left.transitions) {
    p.left_trace.push_back(drawable_frame(spec, t.observation));
  }
  for (const auto& t : right.transitions) {
    p.right_trace.push_back(drawable_frame(spec, t.observation));
  }
  return p;
}

std::string query_payload_json(const QueryPayload& payload) {
  auto trace = [](const std::vector<std::array<double, 2>>& frames) {
    json out = json::array();
    for (const auto& f : frames) out.push_back({f[0], f[1]});
    return out;
  };
  json j = {{"schema", kQuerySchema},
            {"query_id", payload.query_id},
            {"env", payload.env},
            {"created_at_step", payload.created_at_step},
            {"frames", payload.left_trace.size()},
            {"left_trace", trace(payload.left_trace)},
            {"right_trace", trace(payload.right_trace)},
            {"convention", kSliderConvention}};
  return j.dump();
}

// ---------------------------------------------------------------------------

std::int64_t LabelBroker::post(QueryPayload payload, AnswerFn on_answer) {
  std::lock_guard lock(mu_);
  auto entry = std::make_shared<Pending>();
  payload.query_id = next_id_++;
  entry->json = query_payload_json(payload);
  entry->payload = std::move(payload);
  entry->on_answer = std::move(on_answer);
  queue_.push_back(entry);
  index_.emplace_back(entry->payload.query_id, entry);
  return entry->payload.query_id;
}

std::optional<double> LabelBroker::wait(std::int64_t query_id,
                                        std::chrono::duration<double> timeout) {
  std::unique_lock lock(mu_);
  auto it = std::find_if(index_.begin(), index_.end(),
                         [&](const auto& e) { return e.first == query_id; });
  if (it == index_.end()) throw RuntimeError("unknown query id");
  auto entry = it->second;
  const auto deadline =
      std::chrono::steady_clock::now() +
      std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout);
  cv_.wait_until(lock, deadline,
                 [&] { return entry->answer.has_value() || entry->closed; });
  entry->closed = true;
  std::erase(queue_, entry);
  return entry->answer;
}

SubmitResult LabelBroker::submit(std::int64_t query_id, double z) {
  std::lock_guard lock(mu_);
  auto it = std::find_if(index_.begin(), index_.end(),
                         [&](const auto& e) { return e.first == query_id; });
  if (it == index_.end() || it->second->closed ||
      it->second->answer.has_value()) {
    return SubmitResult::kUnknownOrStale;
  }
  if (!(z >= 0.0 && z <= 1.0)) return SubmitResult::kOutOfRange;
  auto entry = it->second;
  if (entry->on_answer) entry->on_answer(z);
  entry->answer = z;
  std::erase(queue_, entry);
  cv_.notify_all();
  return SubmitResult::kAccepted;
}

std::optional<std::string> LabelBroker::oldest_pending() const {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return std::nullopt;
  return queue_.front()->json;
}

std::size_t LabelBroker::pending_count() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void LabelBroker::set_active(bool active) {
  std::lock_guard lock(mu_);
  active_ = active;
}

bool LabelBroker::active() const {
  std::lock_guard lock(mu_);
  return active_;
}

void LabelBroker::close_all() {
  std::lock_guard lock(mu_);
  for (auto& e : queue_) e->closed = true;
  queue_.clear();
  cv_.notify_all();
}

// ---------------------------------------------------------------------------

std::string status_json(const StatusSnapshot& s) {
  json j = {{"steps_done", s.steps_done},
            {"labels_done", s.labels_done},
            {"budget", s.budget},
            {"human_count", s.human_count},
            {"estimator_count", s.estimator_count},
            {"latest_mean_return", s.latest_mean_return}};
  return j.dump();
}

void RunStatus::set(const StatusSnapshot& status) {
  std::lock_guard lock(mu_);
  status_ = status;
}

void RunStatus::update(const std::function<void(StatusSnapshot&)>& fn) {
  std::lock_guard lock(mu_);
  fn(status_);
}

StatusSnapshot RunStatus::get() const {
  std::lock_guard lock(mu_);
  return status_;
}

// ---------------------------------------------------------------------------

struct LabelService::Impl {
  LabelBroker& broker;
  RunStatus& status;
  httplib::Server server;
  std::thread thread;

  Impl(LabelBroker& b, RunStatus& s) : broker(b), status(s) {}

  static void error(httplib::Response& res, int code, const std::string& msg) {
    res.status = code;
    res.set_content(json{{"error", msg}}.dump(), "application/json");
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods",
                                 "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers",
                                 "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&,
                                    httplib::Response& res) {
      res.status = 204;
    });
    server.Get("/api/query", [this](const httplib::Request&,
                                    httplib::Response& res) {
      if (!broker.active()) return error(res, 503, "no active run");
      auto payload = broker.oldest_pending();
      if (!payload) {
        res.status = 204;
        return;
      }
      res.set_content(*payload, "application/json");
    });
    server.Post("/api/label", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      std::int64_t id = 0;
      double z = 0.0;
      try {
        const json body = json::parse(req.body);
        id = body.at("query_id").get<std::int64_t>();
        z = body.at("z").get<double>();
      } catch (const json::exception& e) {
        return error(res, 400, std::string("malformed label: ") + e.what());
      }
      switch (broker.submit(id, z)) {
        case SubmitResult::kAccepted:
          res.set_content(json{{"accepted", true}, {"query_id", id}}.dump(),
                          "application/json");
          return;
        case SubmitResult::kOutOfRange:
          return error(res, 422, "z must lie in [0, 1]");
        case SubmitResult::kUnknownOrStale:
          return error(res, 409, "unknown or already answered query_id");
      }
    });
    server.Get("/api/status", [this](const httplib::Request&,
                                     httplib::Response& res) {
      res.set_content(status_json(status.get()), "application/json");
    });
  }
};

LabelService::LabelService(LabelBroker& broker, RunStatus& status)
    : impl_(std::make_unique<Impl>(broker, status)) {
  impl_->routes();
}

LabelService::~LabelService() { stop(); }

int LabelService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    throw RuntimeError("label service: cannot bind " + host + ":" +
                       std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void LabelService::stop() {
  if (impl_ && impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace prefscale
