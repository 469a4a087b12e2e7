// Copyright 2026 The Feeding Station Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "feeder/server_http.hpp"

namespace feeder::server {
namespace {

using json = nlohmann::json;

const TagId kA(756, 1);

class Http : public ::testing::Test {
 protected:
  void SetUp() override {
    api_ = std::make_unique<HttpApi>(server_, HttpOptions{"s3cret", [this] { return now_ms_; }});
    port_ = api_->bind_any("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { api_->run(); });
    api_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    api_->stop();
    thread_.join();
  }

  httplib::Result ingest(StationId station, const Bytes& payload) {
    return client_->Post("/ingest", json{{"station_id", station}, {"payload_hex", to_hex(payload)}}.dump(),
                         "application/json");
  }
  httplib::Result set_targets(StationId station, const json& body, bool auth = true) {
    httplib::Headers h;
    if (auth) h.emplace("Authorization", "Bearer s3cret");
    return client_->Post(("/stations/" + std::to_string(station) + "/trap-targets").c_str(), h, body.dump(),
                         "application/json");
  }
  void add_visits(int n) {
    for (int i = 0; i < n; ++i) {
      codec::AnimalUpdate u{static_cast<std::uint16_t>(i), i % 2 ? std::optional(kA) : std::nullopt,
                            static_cast<Seconds>(1000 + i), static_cast<Seconds>(1030 + i), 400, 3};
      ASSERT_EQ(ingest(1, codec::encode(u))->status, 200);
    }
  }

  Millis now_ms_ = 1'767'225'600'000;
  Server server_;
  std::unique_ptr<HttpApi> api_;
  int port_ = -1;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(Http, IngestAcksAndDeduplicates) {
  const auto payload = codec::encode(codec::AnimalUpdate{5, kA, 100, 130, 405, 2});
  auto r = ingest(1, payload);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  auto body = json::parse(r->body);
  EXPECT_EQ(body["ack"], true);
  EXPECT_EQ(body["status"], "stored");
  body = json::parse(ingest(1, payload)->body);
  EXPECT_EQ(body["status"], "duplicate");
  body = json::parse(ingest(1, Bytes{0xee})->body);
  EXPECT_EQ(body["status"], "quarantined");
  EXPECT_EQ(body["ack"], false);
  EXPECT_EQ(server_.visit_count(), 1u);
}

TEST_F(Http, IngestRejectsMalformedBody) {
  EXPECT_EQ(client_->Post("/ingest", "{not json", "application/json")->status, 400);
  EXPECT_EQ(client_->Post("/ingest", R"({"station_id":1})", "application/json")->status, 400);
  EXPECT_EQ(client_->Post("/ingest", R"({"station_id":1,"payload_hex":"zz"})", "application/json")->status, 400);
}

TEST_F(Http, SyncRequestGetsDownlink) {
  ASSERT_EQ(set_targets(1, {{"operator", "ana"}, {"changes", {{{"op", "add"}, {"tag", kA.str()}}}}})->status, 200);
  const auto body = json::parse(ingest(1, codec::encode(codec::DbSyncRequest{0, 0}))->body);
  ASSERT_TRUE(body.contains("downlink_hex"));
  const auto msg = codec::decode(from_hex(body["downlink_hex"].get<std::string>()));
  const auto& u = std::get<codec::TrapUpdate>(msg);
  ASSERT_EQ(u.ops.size(), 1u);
  EXPECT_EQ(u.ops[0].tag, kA);
}

TEST_F(Http, VisitsWithFiltersAndPagination) {
  add_visits(25);
  std::vector<json> all;
  std::string url = "/visits?limit=10";
  for (int guard = 0; guard < 10; ++guard) {
    auto r = client_->Get(url.c_str());
    ASSERT_EQ(r->status, 200);
    const auto body = json::parse(r->body);
    for (const auto& v : body["visits"]) all.push_back(v);
    if (body["next_cursor"].is_null()) break;
    url = "/visits?limit=10&cursor=" + body["next_cursor"].get<std::string>();
  }
  ASSERT_EQ(all.size(), 25u);
  EXPECT_EQ(all[0]["weight_g"], 40.0);

  auto tagged = json::parse(client_->Get(("/visits?tag=" + kA.str()).c_str())->body);
  EXPECT_EQ(tagged["visits"].size(), 12u);
  auto untagged = json::parse(client_->Get("/visits?tag=untagged&from=1010&to=1020")->body);
  EXPECT_EQ(untagged["visits"].size(), 5u);
  for (const auto& v : untagged["visits"]) EXPECT_TRUE(v["tag"].is_null());

  EXPECT_EQ(client_->Get("/visits?from=20&to=10")->status, 400);
  EXPECT_EQ(client_->Get("/visits?min_weight=abc")->status, 400);
  EXPECT_EQ(client_->Get("/visits?tag=12")->status, 400);
  EXPECT_EQ(client_->Get("/visits?cursor=x")->status, 400);
}

TEST_F(Http, ExportCsvMatchesServer) {
  add_visits(1200);
  auto r = client_->Get("/export.csv?station=1");
  ASSERT_EQ(r->status, 200);
  EXPECT_EQ(r->get_header_value("Content-Type"), "text/csv");
  VisitFilter f;
  f.station = 1;
  std::ostringstream want;
  server_.export_csv(f, want);
  EXPECT_EQ(r->body, want.str());
  EXPECT_EQ(client_->Get("/export.csv?max_std=-1")->status, 400);
}

TEST_F(Http, Status) {
  codec::SystemUpdate u{0, 5, codec::temperature_units(20), codec::temperature_units(4), 500, 900, 0};
  ingest(2, codec::encode(u));
  ingest(2, codec::encode(codec::TrapEvent{1, 6, kA}));
  const auto body = json::parse(client_->Get("/status")->body);
  ASSERT_EQ(body["stations"].size(), 1u);
  EXPECT_EQ(body["stations"][0]["station_id"], 2);
  EXPECT_EQ(body["stations"][0]["last_status"]["temp_in"], 20.0);
  ASSERT_EQ(body["captures"].size(), 1u);
  EXPECT_EQ(body["captures"][0]["tag"], kA.str());
  EXPECT_EQ(body["captures"][0]["acknowledged"], false);

  httplib::Headers h{{"Authorization", "Bearer s3cret"}};
  EXPECT_EQ(client_->Post("/stations/2/captures/ack", "", "application/json")->status, 401);
  auto ack = client_->Post("/stations/2/captures/ack", h, "", "application/json");
  EXPECT_EQ(json::parse(ack->body)["acknowledged"], 1);
}

TEST_F(Http, TrapTargetsNeedToken) {
  const json body{{"operator", "ana"}, {"changes", {{{"op", "add"}, {"tag", kA.str()}}}}};
  EXPECT_EQ(set_targets(3, body, false)->status, 401);
  httplib::Headers wrong{{"Authorization", "Bearer nope"}};
  EXPECT_EQ(client_->Post("/stations/3/trap-targets", wrong, body.dump(), "application/json")->status, 401);
  EXPECT_TRUE(server_.ledger(3).empty());
}

TEST_F(Http, TrapTargetsAndDelta) {
  auto r = set_targets(3, {{"operator", "ana"},
                           {"changes",
                            {{{"op", "add"}, {"tag", kA.str()}},
                             {{"op", "add"}, {"tag", TagId(756, 2).str()}},
                             {{"master", true}}}}});
  ASSERT_EQ(r->status, 200);
  const auto entries = json::parse(r->body)["entries"];
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[2]["op"], "master");
  EXPECT_LT(entries[0]["change_ts"].get<Seconds>(), entries[1]["change_ts"].get<Seconds>());

  r = set_targets(3, {{"operator", "ben"}, {"changes", {{{"op", "remove"}, {"tag", kA.str()}}}}});
  ASSERT_EQ(r->status, 200);

  auto delta = json::parse(client_->Get("/stations/3/trap-delta?last_updated=0")->body)["updates"];
  ASSERT_EQ(delta.size(), 1u);
  EXPECT_EQ(delta[0]["master"], true);
  EXPECT_EQ(delta[0]["more_follows"], false);
  ASSERT_EQ(delta[0]["ops"].size(), 2u);
  const auto decoded = std::get<codec::TrapUpdate>(codec::decode(from_hex(delta[0]["payload_hex"].get<std::string>())));
  EXPECT_EQ(decoded.ops.size(), 2u);

  EXPECT_EQ(set_targets(3, {{"operator", "ana"}, {"changes", {{{"op", "flip"}, {"tag", kA.str()}}}}})->status, 400);
  EXPECT_EQ(set_targets(3, {{"operator", "ana"}, {"changes", {{{"op", "add"}, {"tag", "bad"}}}}})->status, 400);
  EXPECT_EQ(set_targets(3, {{"operator", "ana"}, {"changes", json::array()}})->status, 400);
  EXPECT_EQ(set_targets(3, {{"changes", {{{"op", "add"}, {"tag", kA.str()}}}}})->status, 400);
  EXPECT_EQ(client_->Get("/stations/3/trap-delta?last_updated=-4")->status, 400);
}

}  // namespace
}  // namespace feeder::server
