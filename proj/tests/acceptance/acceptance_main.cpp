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

// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failures. Tolerances and seeds are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "feeder/codec.hpp"
#include "feeder/link.hpp"
#include "feeder/rfid.hpp"
#include "feeder/server.hpp"
#include "feeder/simharness.hpp"
#include "feeder/trapctl.hpp"
#include "feeder/uplink_queue.hpp"
#include "feeder/weighing.hpp"
#include "oracles/oracles.hpp"

namespace {

using namespace feeder;

struct Outcome {
  bool pass = false;
  std::string measured;
};

struct Criterion {
  const char* name;
  double budget_s;  // wall-clock limit; 0 means none
  std::function<Outcome()> run;
};

std::vector<weighing::WeightSample> samples_of(const sim::Trace& t) {
  std::vector<weighing::WeightSample> out;
  for (const auto& in : t.inputs) {
    if (const auto* s = std::get_if<weighing::WeightSample>(&in)) out.push_back(*s);
  }
  return out;
}

// Weighing accuracy ----------------------------------------------------------

constexpr std::size_t kFixtureRuns = 200;
constexpr std::uint64_t kFixtureSeed = 20'260'101;
constexpr double kOverallMae = 0.41;
constexpr double kConditionMae = 0.95;

Outcome weighing_accuracy() {
  const auto conds = sim::run_weighing_fixture(kFixtureRuns, kFixtureSeed);
  double sum = 0.0;
  std::size_t n = 0;
  double worst = 0.0;
  std::size_t missed = 0;
  std::string per;
  for (const auto& c : conds) {
    const std::size_t measured = c.runs - c.missed;
    sum += c.mean_abs_error * static_cast<double>(measured);
    n += measured;
    missed += c.missed;
    worst = std::max(worst, c.mean_abs_error);
    per += fmt::format(" {:g}g{}={:.3f}", c.weight_grams, c.moving ? "m" : "s", c.mean_abs_error);
  }
  const double overall = n > 0 ? sum / static_cast<double>(n) : std::numeric_limits<double>::infinity();
  return {conds.size() == 6 && missed == 0 && overall <= kOverallMae && worst <= kConditionMae,
          fmt::format("mae={:.3f} worst={:.3f} missed={}{}", overall, worst, missed, per)};
}

// Multi-animal attribution ---------------------------------------------------

Outcome multi_animal() {
  const TagId a(756, 40), b(756, 52);
  sim::Scenario s;
  s.duration_ms = 80'000;
  s.drain_ms = 600'000;
  s.noise.sigma_grams = 0.0;
  s.p_detect = 1.0;
  s.animals = {{"a", a, 40.0, 0.0}, {"b", b, 52.0, 0.0}};
  s.visits = {{"a", 10'000, 40'000}, {"b", 20'000, 60'000}};
  constexpr std::uint64_t seed = 7;

  const auto trace = sim::generate_trace(s, seed);
  const auto expected = oracle::segment(samples_of(trace));
  const auto rep = sim::run_scenario(s, seed);
  bool ok = expected.size() == 2 && rep.server_visits == 2;
  std::string got;
  const Millis origin_ms = static_cast<Millis>(s.clock_origin_s) * 1000;
  for (const auto& e : expected) {
    const TagId want = std::abs(e.weight - 40.0) < std::abs(e.weight - 52.0) ? a : b;
    const double truth = want == a ? 40.0 : 52.0;
    const auto it = std::find_if(rep.visits.begin(), rep.visits.end(), [&](const server::StoredVisit& v) {
      return static_cast<Millis>(v.entry_ts) * 1000 - origin_ms == e.entry_ts / 1000 * 1000;
    });
    if (it == rep.visits.end()) {
      ok = false;
      continue;
    }
    got += fmt::format(" {:.1f}g/{}", it->weight_grams, it->tag ? it->tag->str() : "untagged");
    ok = ok && std::abs(e.weight - truth) <= 1.0 && std::abs(it->weight_grams - truth) <= 1.0 && it->tag == want;
  }
  return {ok, fmt::format("oracle={} server={}{}", expected.size(), rep.server_visits, got)};
}

// RFID visit detection -------------------------------------------------------

Outcome rfid_detection() {
  constexpr int kVisits = 100'000;
  std::mt19937_64 rng(885);
  const TagId tag(756, 7);
  auto rate = [&](double p) {
    int tagged = 0;
    for (int i = 0; i < kVisits; ++i) {
      const Millis entry = static_cast<Millis>(i) * 60'000;
      AnimalVisit v;
      v.entry_ts = entry;
      v.exit_ts = entry + 30'000;
      std::vector<RfidDetection> reads;
      if (auto d = rfid::simulate_pass(tag, p, v.entry_ts + 200, 1, rng)) reads.push_back(*d);
      if (auto d = rfid::simulate_pass(tag, p, v.exit_ts - 200, 1, rng)) reads.push_back(*d);
      tagged += rfid::match_detections(v, reads).tag == tag;
    }
    return static_cast<double>(tagged) / kVisits;
  };
  const double low = rate(0.885);
  const double high = rate(0.965);
  const double high_analytic = 1.0 - (1.0 - 0.965) * (1.0 - 0.965);
  return {std::abs(low - 0.9868) <= 0.003 && std::abs(high - 0.99878) <= 0.001 &&
              std::abs(high_analytic - 0.99878) <= 1e-5,
          fmt::format("p=0.885:{:.5f} p=0.965:{:.5f}", low, high)};
}

// Link reliability -----------------------------------------------------------

Outcome link_reliability() {
  using namespace uplinkqueue;
  constexpr std::uint32_t kPackets = 1995;
  constexpr double kDrop = 0.1418;
  const double analytic = 1.0 - kDrop * kDrop;

  auto run = [&](std::optional<std::uint32_t> max_attempts, std::uint64_t seed) {
    RetryPolicy p;
    p.max_attempts = max_attempts;
    UplinkQueue q(p);
    LossyLink link(LinkModel{kDrop, 0.0, 0, 0}, seed, [](const Bytes&, Millis) { return Reception{}; });
    for (std::uint32_t i = 0; i < kPackets; ++i) {
      q.enqueue(codec::encode(codec::SystemUpdate{static_cast<std::uint16_t>(i), i * 600, 0, 0, 0, 0, 0}),
                static_cast<Millis>(i) * 600'000);
    }
    while (auto t = q.next_wakeup()) q.pump(link, *t);
    return std::make_pair(q.metrics().confirmed, q.empty());
  };
  const auto [bounded, bounded_empty] = run(2, 1418);
  const auto [unbounded, drained] = run(std::nullopt, 1419);
  const double simulated = static_cast<double>(bounded) / kPackets;
  return {std::abs(analytic - 0.9799) <= 0.01 && std::abs(simulated - 0.9799) <= 0.01 && bounded_empty &&
              unbounded == kPackets && drained,
          fmt::format("analytic={:.4f} simulated={:.4f} unbounded={}/{} drained={}", analytic, simulated, unbounded,
                      kPackets, drained)};
}

// Codec soundness ------------------------------------------------------------

Outcome codec_soundness() {
  std::mt19937_64 rng(51);
  std::size_t mismatches = 0;
  std::size_t longest = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto msg = oracle::random_message(rng);
    const auto bytes = codec::encode(msg);
    longest = std::max(longest, bytes.size());
    if (bytes != oracle::encode(msg) || codec::decode(bytes) != msg) ++mismatches;
  }
  std::size_t decoded = 0;
  std::size_t typed = 0;
  std::size_t other = 0;
  std::uniform_int_distribution<int> len(0, 64);
  for (int i = 0; i < 1'000'000; ++i) {
    Bytes in(static_cast<std::size_t>(len(rng)));
    for (auto& b : in) b = static_cast<std::uint8_t>(rng());
    try {
      const auto msg = codec::decode(in);
      ++decoded;
      if (codec::encode(msg) != in) ++other;
    } catch (const codec::DecodeError&) {
      ++typed;
    } catch (...) {
      ++other;
    }
  }
  return {mismatches == 0 && longest <= 51 && other == 0,
          fmt::format("mismatches={} max_bytes={} fuzz_ok={} fuzz_typed_errors={} fuzz_other={}", mismatches, longest,
                      decoded, typed, other)};
}

// Trap sync round-trip -------------------------------------------------------

Outcome trap_sync() {
  std::mt19937_64 rng(1000);
  std::vector<TagId> pool;
  for (int i = 0; i < 16; ++i) pool.push_back(oracle::random_tag(rng));
  std::size_t diverged = 0;
  std::size_t replay_changed = 0;
  std::size_t downlinks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    server::Server s;
    trapctl::TrapDatabase db;
    std::vector<oracle::LedgerChange> history;
    Millis now = 0;
    auto sync = [&] {
      for (int guard = 0; guard < 64; ++guard) {
        const auto chain = s.trap_delta(1, db.last_updated, now);
        const auto wire = codec::encode(chain.front());
        const auto update = std::get<codec::TrapUpdate>(codec::decode(wire));
        db = trapctl::apply_trap_update(db, update);
        ++downlinks;
        if (trapctl::apply_trap_update(db, update) != db) ++replay_changed;
        if (!update.more_follows) break;
      }
    };
    const int rounds = 1 + static_cast<int>(rng() % 8);
    for (int r = 0; r < rounds; ++r) {
      std::vector<server::TargetChange> batch;
      const int n = 1 + static_cast<int>(rng() % 20);
      for (int k = 0; k < n; ++k) {
        oracle::LedgerChange c;
        server::TargetChange t;
        if (rng() % 8 == 0) {
          c.master = t.master = rng() % 2;
        } else {
          c.tag = t.tag = pool[rng() % pool.size()];
          c.add = rng() % 3 != 0;
          t.kind = c.add ? codec::TagOpKind::kAdd : codec::TagOpKind::kRemove;
        }
        history.push_back(c);
        batch.push_back(t);
      }
      now += 1 + static_cast<Millis>(rng() % 5000);
      s.set_trap_targets(1, batch, "op" + std::to_string(r % 3), now);
      if (rng() % 2) sync();
    }
    sync();
    const auto [want, master] = oracle::fold(history);
    if (db.entries != want || db.master != master) ++diverged;
  }
  return {diverged == 0 && replay_changed == 0,
          fmt::format("histories=1000 diverged={} downlinks={} replay_changed={}", diverged, downlinks,
                      replay_changed)};
}

// State-machine oracle equivalence -------------------------------------------

Outcome segmentation_oracle() {
  std::mt19937_64 rng(500);
  std::size_t differing = 0;
  std::size_t visits = 0;
  std::size_t longest = 0;
  for (int trial = 0; trial < 500; ++trial) {
    sim::Scenario s;
    s.duration_ms = 95'000;
    s.noise.sigma_grams = 0.0;
    const int animals = 1 + static_cast<int>(rng() % 3);
    std::uniform_real_distribution<double> weight(25.0, 110.0);
    for (int a = 0; a < animals; ++a) {
      const std::string name(1, static_cast<char>('a' + a));
      s.animals.push_back({name, TagId(756, static_cast<std::uint64_t>(a + 1)), weight(rng), 0.0});
      s.random_visits.push_back({name, 1 + rng() % 2, 4'000, 25'000});
    }
    const auto samples = samples_of(sim::generate_trace(s, rng()));
    longest = std::max(longest, samples.size());

    weighing::WeighingEngine engine;
    std::vector<AnimalVisit> got;
    for (const auto& x : samples) {
      for (auto& ev : engine.ingest(x)) {
        if (auto* v = std::get_if<weighing::VisitCompleted>(&ev)) got.push_back(v->visit);
      }
    }
    const auto want = oracle::segment(samples);
    visits += want.size();
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = std::abs(got[i].weight_grams - want[i].weight) <= 1e-9 && got[i].entry_ts == want[i].entry_ts &&
             got[i].exit_ts == want[i].exit_ts;
    }
    differing += !same;
  }
  return {differing == 0 && longest <= 2000,
          fmt::format("traces=500 visits={} max_samples={} differing={}", visits, longest, differing)};
}

// End-to-end night -----------------------------------------------------------

sim::Scenario night() {
  sim::Scenario s;
  s.station_id = 9;
  s.duration_ms = 12 * 3'600'000;  // 18:00 to 06:00
  s.drain_ms = 3'600'000;
  s.sparse_idle = true;
  s.p_detect = 1.0;
  s.noise.sigma_grams = 0.2;
  s.link = uplinkqueue::LinkModel{0.15, 0.1, 800, 2'000};
  s.max_attempts = std::nullopt;
  s.animals = {{"m1", TagId(756, 101), 42.5, 0.0},
               {"m2", TagId(756, 102), 47.0, 0.0},
               {"f1", TagId(756, 103), 55.5, 0.0},
               {"x", std::nullopt, 38.0, 0.0}};
  // Busy after dusk, a lull, and a second round before dawn.
  s.visits = {{"m1", 1'200'000, 1'260'000}, {"f1", 1'230'000, 1'320'000}, {"m2", 1'290'000, 1'350'000},
              {"x", 3'000'000, 3'045'000},  {"m1", 21'600'000, 21'640'000}, {"f1", 39'000'000, 39'080'000},
              {"x", 39'030'000, 39'060'000}, {"m2", 40'000'000, 40'050'000}};
  s.random_visits = {{"m1", 3, 20'000, 60'000}, {"m2", 3, 20'000, 60'000}, {"f1", 2, 20'000, 90'000},
                     {"x", 2, 20'000, 60'000}};
  return s;
}

Outcome end_to_end() {
  const auto s = night();
  constexpr std::uint64_t seed = 4;
  const auto truth = sim::generate_trace(s, seed).truth;
  const auto rep = sim::run_scenario(s, seed);
  const auto origin = static_cast<std::int64_t>(s.clock_origin_s);

  // Each true visit must map to exactly one stored visit with the same
  // second-resolution times, the weight within 1 g and the same tag.
  std::vector<bool> used(rep.visits.size(), false);
  std::size_t matched = 0;
  std::size_t tags_ok = 0;
  std::size_t untagged = 0;
  for (const auto& t : truth) {
    for (std::size_t i = 0; i < rep.visits.size(); ++i) {
      const auto& v = rep.visits[i];
      if (used[i]) continue;
      if (std::llabs(static_cast<std::int64_t>(v.entry_ts) - (origin + t.entry_ms / 1000)) > 1) continue;
      if (std::llabs(static_cast<std::int64_t>(v.exit_ts) - (origin + t.exit_ms / 1000)) > 1) continue;
      if (std::abs(v.weight_grams - t.weight_grams) > 1.0) continue;
      used[i] = true;
      ++matched;
      tags_ok += v.tag == t.tag;
      untagged += !t.tag;
      break;
    }
  }
  const std::size_t want_status = static_cast<std::size_t>(s.duration_ms / 600'000);
  return {matched == truth.size() && rep.server_visits == truth.size() && tags_ok == truth.size() &&
              rep.system_updates == want_status && rep.queue_left == 0 && rep.parked == 0,
          fmt::format("truth={} server={} matched={} tags_ok={} untagged={} system_updates={}/{} transmissions={} "
                      "enqueued={}",
                      truth.size(), rep.server_visits, matched, tags_ok, untagged, rep.system_updates, want_status,
                      rep.transmissions, rep.uplinks_enqueued)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"weighing_accuracy", 30.0, weighing_accuracy},
      {"multi_animal_attribution", 1.0, multi_animal},
      {"rfid_visit_detection", 10.0, rfid_detection},
      {"link_reliability", 10.0, link_reliability},
      {"codec_soundness", 60.0, codec_soundness},
      {"trap_sync_round_trip", 10.0, trap_sync},
      {"segmentation_oracle", 0.0, segmentation_oracle},
      {"end_to_end_night", 0.0, end_to_end},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0.0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    fmt::print("{} {} {} ({:.2f}s{})\n", pass ? "PASS" : "FAIL", c.name, o.measured, secs,
               c.budget_s > 0.0 ? fmt::format(" of {:g}s", c.budget_s) : "");
    std::fflush(stdout);
  }
  return failures;
}
