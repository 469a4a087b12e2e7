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

// station run --config <file> --trace <file|live-sim> --seed N [--deterministic]
//
// Runs the station daemon against a recorded trace (or a generated one) with
// an in-process server on the far side of a simulated lossy link.

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "feeder/simharness.hpp"
#include "feeder/station.hpp"

using namespace feeder;

namespace {

// Queue drain after the trace ends, before results are read.
constexpr Millis kDrainMs = 3'600'000;

// A night of the default colony: three tagged animals and one without a chip.
sim::Scenario live_sim_scenario(const StationConfig& config) {
  sim::Scenario sc;
  sc.station_id = config.station_id;
  sc.clock_origin_s = config.clock_origin_s != 0 ? config.clock_origin_s : sc.clock_origin_s;
  sc.duration_ms = 2 * 3'600'000;
  sc.link = config.link;
  sc.max_attempts = config.retry.max_attempts;
  sc.sparse_idle = true;
  sc.animals = {{"a", TagId(756, 1001), 38.5, 0.0},
                {"b", TagId(756, 1002), 44.0, 0.0},
                {"c", TagId(756, 1003), 51.2, 0.0},
                {"d", std::nullopt, 47.0, 0.0}};
  for (const auto& a : sc.animals) sc.random_visits.push_back({a.name, 6, 20'000, 90'000});
  return sc;
}

int run(const std::string& config_path, const std::string& trace_arg, std::uint64_t seed, bool deterministic) {
  StationConfig config = load_station_config(config_path);
  Logger log(&std::cerr, config.log_level);

  std::vector<StationInput> inputs;
  Millis t_end = 0;
  if (trace_arg == "live-sim") {
    const auto sc = live_sim_scenario(config);
    inputs = sim::generate_trace(sc, seed).inputs;
    t_end = sc.duration_ms;
    if (config.clock_origin_s == 0) config.clock_origin_s = sim::Scenario{}.clock_origin_s;
  } else {
    inputs = load_trace(trace_arg, config.station_id);
  }
  for (const auto& in : inputs) t_end = std::max(t_end, input_time(in));

  server::Server server;
  const Millis origin_ms = config.clock_origin_s * 1000;
  uplinkqueue::LossyLink link(config.link, seed, [&](const Bytes& payload, Millis arrival) {
    auto r = server.ingest(config.station_id, payload, origin_ms + arrival);
    return uplinkqueue::Reception{r.ack, std::move(r.downlink)};
  });

  station::StationMetrics metrics;
  std::size_t visits = 0;
  std::size_t sent = 0;
  std::size_t queue_left = 0;
  if (deterministic) {
    station::Station st(config, link, &log);
    st.start(0);
    for (const auto& in : inputs) st.feed(in);
    st.finish(t_end);
    st.drain(t_end + kDrainMs);
    metrics = st.orchestrator().metrics();
    visits = st.orchestrator().visits().size();
    sent = st.orchestrator().sent().size();
    queue_left = st.queue().size();
  } else {
    const auto r = station::run_live(config, inputs, link, 0, t_end, &log, kDrainMs);
    metrics = r.metrics;
    visits = r.visits.size();
    sent = r.sent.size();
    queue_left = r.queue_left;
  }

  auto line = [](std::string_view k, auto v) { fmt::print("{} {}\n", k, v); };
  line("samples", metrics.samples);
  line("rejected_samples", metrics.rejected_samples);
  line("visits", visits);
  line("animal_updates", metrics.animal_updates);
  line("system_updates", metrics.system_updates);
  line("db_sync_requests", metrics.db_sync_requests);
  line("trap_events", metrics.trap_events);
  line("detections", metrics.detections);
  line("bad_frames", metrics.bad_frames);
  line("uplinks_enqueued", sent);
  line("server_visits", server.visit_count());
  line("queue_left", queue_left);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feeding station daemon"};
  app.require_subcommand(1);
  auto* run_cmd = app.add_subcommand("run", "Run the station against a trace");
  std::string config_path;
  std::string trace_arg;
  std::uint64_t seed = 1;
  bool deterministic = false;
  run_cmd->add_option("--config", config_path, "Station config file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--trace", trace_arg, "Trace file, or live-sim for a generated night")->required();
  run_cmd->add_option("--seed", seed, "Seed for the link and generated traces");
  run_cmd->add_flag("--deterministic", deterministic, "Single task over a simulated clock");
  CLI11_PARSE(app, argc, argv);

  try {
    return run(config_path, trace_arg, seed, deterministic);
  } catch (const std::exception& e) {
    std::cerr << "station: " << e.what() << '\n';
    return 1;
  }
}
