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

#include <algorithm>
#include <filesystem>

#include <gtest/gtest.h>

#include "feeder/server.hpp"
#include "feeder/simharness.hpp"
#include "feeder/station.hpp"

namespace feeder::station {
namespace {

const TagId kA(756, 1001);
const TagId kB(756, 1002);

/// A station wired to an in-process server over a link.
struct Rig {
  explicit Rig(StationConfig c = {}, uplinkqueue::LinkModel model = {})
      : config(std::move(c)),
        link(model, 17,
             [this](const Bytes& payload, Millis arrival) {
               const auto r = server.ingest(config.station_id, payload, arrival);
               return uplinkqueue::Reception{r.ack, r.downlink};
             }),
        station(config, link) {}

  StationConfig config;
  server::Server server;
  uplinkqueue::LossyLink link;
  Station station;
};

/// Samples at 20 Hz from `from` to `to` (exclusive) at a constant level.
void hold(std::vector<StationInput>& out, Millis from, Millis to, double grams) {
  for (Millis t = from; t < to; t += 50) out.push_back(weighing::WeightSample{t, grams});
}

/// One clean visit of `grams` between entry and exit, on an empty scale.
void visit(std::vector<StationInput>& out, Millis entry, Millis exit, double grams) {
  hold(out, entry, exit, grams);
}

std::size_t count_sent(const Orchestrator& o, codec::MessageType type) {
  return static_cast<std::size_t>(std::count_if(o.sent().begin(), o.sent().end(), [&](const SentRecord& r) {
    return codec::type_of(r.msg) == type;
  }));
}

TEST(Station, IdleHalfHourSendsThreeSystemUpdates) {
  Rig rig;
  std::vector<StationInput> in;
  hold(in, 0, 30 * 60'000, 0.0);
  rig.station.start(0);
  for (const auto& x : in) rig.station.feed(x);
  rig.station.finish(30 * 60'000);
  rig.station.drain(40 * 60'000);
  const auto& o = rig.station.orchestrator();
  EXPECT_EQ(count_sent(o, codec::MessageType::kSystemUpdate), 3u);
  EXPECT_EQ(count_sent(o, codec::MessageType::kDbSyncRequest), 1u);
  EXPECT_EQ(count_sent(o, codec::MessageType::kAnimalUpdate), 0u);
  std::vector<Millis> ts;
  for (const auto& r : o.sent()) {
    if (codec::type_of(r.msg) == codec::MessageType::kSystemUpdate) ts.push_back(r.ts);
  }
  EXPECT_EQ(ts, (std::vector<Millis>{600'000, 1'200'000, 1'800'000}));
  ASSERT_EQ(rig.server.status().size(), 1u);
  EXPECT_EQ(rig.server.status()[0].status_count, 3u);
}

TEST(Station, TimersFireWithoutSamples) {
  Rig rig;
  rig.station.start(0);
  rig.station.finish(3'600'000);
  EXPECT_EQ(count_sent(rig.station.orchestrator(), codec::MessageType::kSystemUpdate), 6u);
}

TEST(Station, OneAnimalUpdatePerVisitWithTags) {
  Rig rig;
  std::vector<StationInput> in;
  hold(in, 0, 10'000, 0.0);
  in.push_back(RfidDetection{kA, 10'200, 1});
  visit(in, 10'000, 30'000, 41.3);
  hold(in, 30'000, 60'000, 0.0);
  visit(in, 60'000, 75'000, 52.0);
  hold(in, 75'000, 120'000, 0.0);
  std::stable_sort(in.begin(), in.end(),
                   [](const StationInput& a, const StationInput& b) { return input_time(a) < input_time(b); });
  rig.station.start(0);
  for (const auto& x : in) rig.station.feed(x);
  rig.station.finish(120'000);
  rig.station.drain(600'000);

  const auto& visits = rig.station.orchestrator().visits();
  ASSERT_EQ(visits.size(), 2u);
  EXPECT_EQ(visits[0].tag, kA);
  EXPECT_NEAR(visits[0].weight_grams, 41.3, 1e-9);
  EXPECT_EQ(visits[0].entry_ts, 10'000);
  EXPECT_EQ(visits[0].exit_ts, 30'000);
  EXPECT_FALSE(visits[1].tag);
  EXPECT_EQ(count_sent(rig.station.orchestrator(), codec::MessageType::kAnimalUpdate), 2u);

  const auto page = rig.server.query_visits({});
  ASSERT_EQ(page.visits.size(), 2u);
  EXPECT_EQ(page.visits[0].tag, kA);
  EXPECT_NEAR(page.visits[0].weight_grams, 41.3, 0.05);
  EXPECT_EQ(page.visits[0].entry_ts, rig.config.clock_origin_s + 10);
}

TEST(Station, SentClockIsMonotonic) {
  sim::Scenario s;
  s.duration_ms = 2 * 3'600'000;
  s.sparse_idle = true;
  s.animals = {{"a", kA, 40.0, 0.0}, {"b", kB, 52.0, 0.0}, {"c", std::nullopt, 45.0, 0.0}};
  s.random_visits = {{"a", 6, 20'000, 60'000}, {"b", 6, 20'000, 60'000}, {"c", 4, 20'000, 60'000}};
  const auto trace = sim::generate_trace(s, 5);

  StationConfig c;
  c.clock_origin_s = s.clock_origin_s;
  Rig rig(c, uplinkqueue::LinkModel{0.2, 0.1, 200, 0});
  rig.station.start(0);
  for (const auto& x : trace.inputs) rig.station.feed(x);
  rig.station.finish(s.duration_ms);
  rig.station.drain(s.duration_ms + 3'600'000);

  const auto& sent = rig.station.orchestrator().sent();
  for (std::size_t i = 1; i < sent.size(); ++i) EXPECT_LE(sent[i - 1].ts, sent[i].ts) << i;
  for (std::size_t i = 1; i < sent.size(); ++i) {
    EXPECT_EQ(static_cast<std::uint16_t>(sent[i - 1].seq + 1), sent[i].seq);
  }
  EXPECT_EQ(rig.station.orchestrator().visits().size(), trace.truth.size());
  EXPECT_EQ(rig.server.visit_count(), trace.truth.size());
}

TEST(Station, RfidFaultGivesUntaggedVisitsAndFlag) {
  StationConfig c;
  Rig rig(c);
  std::vector<StationInput> in;
  hold(in, 0, 5'000, 0.0);
  in.push_back(RfidFaultInput{5'000, true});
  visit(in, 10'000, 30'000, 40.0);
  hold(in, 30'000, 650'000, 0.0);
  rig.station.start(0);
  for (const auto& x : in) rig.station.feed(x);
  rig.station.finish(650'000);

  const auto& o = rig.station.orchestrator();
  ASSERT_EQ(o.visits().size(), 1u);
  EXPECT_FALSE(o.visits()[0].tag);
  bool flagged = false;
  for (const auto& r : o.sent()) {
    if (const auto* u = std::get_if<codec::SystemUpdate>(&r.msg)) flagged = (u->error_flags & codec::kErrRfidFault) != 0;
  }
  EXPECT_TRUE(flagged);
  EXPECT_EQ(o.metrics().trap_events, 0u);
}

TEST(Station, TwelveTargetsSyncAsChainedDownlinks) {
  Rig rig;
  std::vector<server::TargetChange> changes;
  for (std::uint64_t i = 0; i < 12; ++i) changes.push_back({TagId(756, 2000 + i), codec::TagOpKind::kAdd, false});
  rig.server.set_trap_targets(1, changes, "op", 0);

  rig.station.start(1000);
  rig.station.drain(600'000);
  rig.station.advance_to(600'000);
  const auto& o = rig.station.orchestrator();
  EXPECT_EQ(o.database().entries.size(), 12u);
  EXPECT_EQ(o.metrics().trap_updates_applied, 2u);
  EXPECT_EQ(count_sent(o, codec::MessageType::kDbSyncRequest), 2u);
  EXPECT_FALSE(o.sync_outstanding());

  // Replaying the last downlink changes nothing.
  const auto before = o.database();
  const auto chain = rig.server.trap_delta(1, 0, 1000);
  ASSERT_EQ(chain.size(), 2u);
  EXPECT_EQ(chain[0].ops.size(), 7u);
  EXPECT_TRUE(chain[0].more_follows);
  EXPECT_EQ(chain[1].ops.size(), 5u);
  struct Sink : Outbox {
    std::optional<std::uint16_t> submit(codec::Message, Millis) override { return 0; }
  } sink;
  rig.station.orchestrator().on_downlink(codec::encode(chain[1]), 700'000, sink);
  EXPECT_EQ(o.database().entries, before.entries);
  // An older one is refused.
  rig.station.orchestrator().on_downlink(codec::encode(chain[0]), 700'000, sink);
  EXPECT_EQ(o.database(), before);
}

TEST(Station, TargetDetectionCapturesOnce) {
  Rig rig;
  rig.server.set_trap_targets(1, {{kA, codec::TagOpKind::kAdd, false}}, "op", 0);
  std::vector<StationInput> in;
  hold(in, 0, 10'000, 0.0);
  in.push_back(RfidDetection{kA, 10'100, 1});
  in.push_back(RfidDetection{kA, 10'600, 1});
  visit(in, 10'000, 30'000, 40.0);
  hold(in, 30'000, 60'000, 0.0);
  std::stable_sort(in.begin(), in.end(),
                   [](const StationInput& a, const StationInput& b) { return input_time(a) < input_time(b); });
  rig.station.start(0);
  for (const auto& x : in) rig.station.feed(x);
  rig.station.finish(60'000);
  rig.station.drain(600'000);
  EXPECT_EQ(rig.station.orchestrator().metrics().trap_events, 1u);
  ASSERT_EQ(rig.server.captures().size(), 1u);
  EXPECT_EQ(rig.server.captures()[0].tag, kA);
  // The capture asks for fresh targets.
  EXPECT_GE(count_sent(rig.station.orchestrator(), codec::MessageType::kDbSyncRequest), 2u);
}

TEST(Station, MasterTrapsUntaggedEntrance) {
  Rig rig;
  rig.server.set_trap_targets(1, {{std::nullopt, codec::TagOpKind::kAdd, true}}, "op", 0);
  std::vector<StationInput> in;
  hold(in, 0, 10'000, 0.0);
  visit(in, 10'000, 30'000, 40.0);
  hold(in, 30'000, 40'000, 0.0);
  rig.station.start(0);
  for (const auto& x : in) rig.station.feed(x);
  rig.station.finish(40'000);
  rig.station.drain(600'000);
  ASSERT_EQ(rig.server.captures().size(), 1u);
  EXPECT_FALSE(rig.server.captures()[0].tag);
}

TEST(Station, HumidityAndUndeliveredFlags) {
  StationConfig c;
  c.retry.max_attempts = 1;
  Rig rig(c, uplinkqueue::LinkModel{1.0, 0.0, 0, 0});
  rig.station.start(0);
  rig.station.feed(EnvInput{1000, EnvReading{20, 5, 95, 99}});
  rig.station.finish(1'300'000);
  std::vector<std::uint16_t> flags;
  for (const auto& r : rig.station.orchestrator().sent()) {
    if (const auto* u = std::get_if<codec::SystemUpdate>(&r.msg)) flags.push_back(u->error_flags);
  }
  ASSERT_EQ(flags.size(), 2u);
  EXPECT_TRUE(flags[0] & codec::kErrHumidityIngress);
  EXPECT_TRUE(flags[0] & codec::kErrUplinkUndelivered);  // the first sync was parked
}

TEST(Station, LiveModeMatchesDeterministic) {
  sim::Scenario s;
  s.duration_ms = 3'600'000;
  s.sparse_idle = true;
  s.noise.sigma_grams = 0.0;
  s.animals = {{"a", kA, 40.0, 0.0}, {"b", std::nullopt, 55.0, 0.0}};
  s.random_visits = {{"a", 5, 20'000, 60'000}, {"b", 5, 20'000, 60'000}};
  const auto trace = sim::generate_trace(s, 8);

  StationConfig c;
  c.clock_origin_s = s.clock_origin_s;
  server::Server srv;
  uplinkqueue::LossyLink link({}, 3, [&](const Bytes& p, Millis t) {
    const auto r = srv.ingest(c.station_id, p, t);
    return uplinkqueue::Reception{r.ack, r.downlink};
  });
  const auto live = run_live(c, trace.inputs, link, 0, s.duration_ms);
  EXPECT_EQ(live.visits.size(), trace.truth.size());
  EXPECT_EQ(live.queue_left, 0u);
  EXPECT_EQ(srv.visit_count(), trace.truth.size());
  EXPECT_EQ(live.metrics.system_updates, 6u);
}

}  // namespace
}  // namespace feeder::station
