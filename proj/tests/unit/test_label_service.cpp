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

#include <atomic>
#include <thread>

#include "doctest.h"
#include "prefscale/label_service.hpp"
#include "support.hpp"
// After Eigen: the resolver header pulled in here defines a macro that
// collides with Eigen parameter names.
#include "httplib.h"
#include "json.hpp"

using namespace prefscale;
using nlohmann::json;

namespace {

QueryPayload sample_payload(std::uint64_t seed) {
  const EnvSpec spec = make_env_spec("velocity_runner");
  const auto segs = testing::runner_segments(seed, 1, 25);
  return make_query_payload(spec, segs.at(0), segs.at(1), 1234);
}

struct Fixture {
  LabelBroker broker;
  RunStatus status;
  LabelService service{broker, status};
  int port = service.start("127.0.0.1", 0);
  httplib::Client client{"127.0.0.1", port};

  httplib::Result post_label(std::int64_t id, double z) {
    return client.Post("/api/label", json{{"query_id", id}, {"z", z}}.dump(),
                       "application/json");
  }
};

}  // namespace

TEST_CASE("payload carries traces and no reward fields") {
  const auto p = sample_payload(1);
  CHECK(p.left_trace.size() == 25);
  CHECK(p.right_trace.size() == 25);
  const auto j = json::parse(query_payload_json(p));
  CHECK(j["schema"] == kQuerySchema);
  CHECK(j["created_at_step"] == 1234);
  CHECK(j["frames"] == 25);
  CHECK(j["left_trace"][0].size() == 2);
  const std::string text = j.dump();
  for (const char* banned : {"reward", "return", "true_", "predicted"}) {
    CHECK_MESSAGE(text.find(banned) == std::string::npos, banned);
  }
}

TEST_CASE("broker accepts one answer per query") {
  LabelBroker broker;
  double seen = -1.0;
  const auto id = broker.post(sample_payload(2), [&](double z) { seen = z; });
  CHECK(id == 1);
  CHECK(broker.pending_count() == 1);
  CHECK(broker.submit(id, 1.2) == SubmitResult::kOutOfRange);
  CHECK(broker.submit(id, std::nan("")) == SubmitResult::kOutOfRange);
  CHECK(broker.submit(99, 0.5) == SubmitResult::kUnknownOrStale);
  CHECK(broker.submit(id, 0.25) == SubmitResult::kAccepted);
  CHECK(seen == 0.25);
  CHECK(broker.submit(id, 0.75) == SubmitResult::kUnknownOrStale);
  CHECK(broker.wait(id, std::chrono::milliseconds(1)) == 0.25);
  CHECK(broker.pending_count() == 0);
}

TEST_CASE("broker timeout closes the query") {
  LabelBroker broker;
  bool called = false;
  const auto id = broker.post(sample_payload(3), [&](double) { called = true; });
  CHECK_FALSE(broker.wait(id, std::chrono::milliseconds(5)).has_value());
  CHECK(broker.submit(id, 0.5) == SubmitResult::kUnknownOrStale);
  CHECK_FALSE(called);
  CHECK_FALSE(broker.oldest_pending().has_value());
}

TEST_CASE("queries are served oldest first") {
  LabelBroker broker;
  const auto a = broker.post(sample_payload(4), {});
  const auto b = broker.post(sample_payload(5), {});
  CHECK(b == a + 1);
  CHECK(json::parse(*broker.oldest_pending())["query_id"] == a);
  broker.submit(a, 1.0);
  CHECK(json::parse(*broker.oldest_pending())["query_id"] == b);
}

TEST_CASE("GET /api/query states") {
  Fixture f;
  auto res = f.client.Get("/api/query");
  REQUIRE(res);
  CHECK(res->status == 503);
  f.broker.set_active(true);
  res = f.client.Get("/api/query");
  CHECK(res->status == 204);
  const auto id = f.broker.post(sample_payload(6), {});
  res = f.client.Get("/api/query");
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
  const auto j = json::parse(res->body);
  CHECK(j["query_id"] == id);
  CHECK(j["env"] == "velocity_runner");
}

TEST_CASE("POST /api/label status codes") {
  Fixture f;
  f.broker.set_active(true);
  double seen = -1.0;
  const auto id = f.broker.post(sample_payload(7), [&](double z) { seen = z; });
  auto res = f.client.Post("/api/label", "{not json", "application/json");
  CHECK(res->status == 400);
  res = f.client.Post("/api/label", R"({"query_id": 1})", "application/json");
  CHECK(res->status == 400);
  res = f.post_label(id, 1.5);
  CHECK(res->status == 422);
  res = f.post_label(id, -0.1);
  CHECK(res->status == 422);
  res = f.post_label(id + 10, 0.5);
  CHECK(res->status == 409);
  res = f.post_label(id, 0.87);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["accepted"] == true);
  CHECK(seen == 0.87);
  res = f.post_label(id, 0.3);
  CHECK(res->status == 409);
  CHECK(seen == 0.87);
  res = f.client.Options("/api/label");
  CHECK(res->status == 204);
}

TEST_CASE("GET /api/status") {
  Fixture f;
  f.status.set({500, 3, 10, 2, 1, 42.5});
  const auto res = f.client.Get("/api/status");
  REQUIRE(res);
  const auto j = json::parse(res->body);
  CHECK(j["steps_done"] == 500);
  CHECK(j["labels_done"] == 3);
  CHECK(j["budget"] == 10);
  CHECK(j["human_count"] == 2);
  CHECK(j["estimator_count"] == 1);
  CHECK(j["latest_mean_return"] == 42.5);
}

TEST_CASE("a slow client is waited for") {
  Fixture f;
  f.broker.set_active(true);
  std::atomic<double> seen = -1.0;
  const auto id = f.broker.post(sample_payload(8), [&](double z) { seen = z; });
  std::thread client([port = f.port] {
    httplib::Client c("127.0.0.1", port);
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    auto q = c.Get("/api/query");
    const auto qid = json::parse(q->body)["query_id"].get<std::int64_t>();
    c.Post("/api/label", json{{"query_id", qid}, {"z", 0.6}}.dump(), "application/json");
  });
  const auto answer = f.broker.wait(id, std::chrono::seconds(20));
  client.join();
  REQUIRE(answer.has_value());
  CHECK(*answer == 0.6);
  CHECK(seen == 0.6);
}

TEST_CASE("service restarts on a fresh port") {
  LabelBroker broker;
  RunStatus status;
  LabelService a(broker, status);
  const int port = a.start("127.0.0.1", 0);
  CHECK(port > 0);
  a.stop();
  a.stop();
  LabelService b(broker, status);
  CHECK(b.start("127.0.0.1", 0) > 0);
}
