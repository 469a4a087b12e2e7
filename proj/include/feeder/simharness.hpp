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

// Scenario generation and discrete-event runs of station + lossy link +
// server over a virtual clock.

#ifndef FEEDER_SIMHARNESS_HPP
#define FEEDER_SIMHARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "feeder/config.hpp"
#include "feeder/link.hpp"
#include "feeder/log.hpp"
#include "feeder/server.hpp"
#include "feeder/trace.hpp"
#include "feeder/types.hpp"

namespace feeder::sim {

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Animal {
  std::string name;
  std::optional<TagId> tag;  // empty: no chip
  double weight_grams = 40.0;
  /// Linear weight change over the scenario, for seasonal trends.
  double trend_grams_per_day = 0.0;
};

struct ScheduledVisit {
  std::string animal;
  Millis entry_ms = 0;
  Millis exit_ms = 0;
};

/// Visits placed at random by generate_trace.
struct RandomVisits {
  std::string animal;
  std::size_t count = 0;
  Millis min_duration_ms = 20'000;
  Millis max_duration_ms = 120'000;
};

struct NoiseModel {
  double sigma_grams = 0.3;
  /// Movement bursts per second of occupancy; half-sine pulses.
  double burst_rate_hz = 0.0;
  double burst_max_grams = 15.0;
  Millis burst_min_ms = 200;
  Millis burst_max_ms = 900;
  /// Per-run calibration error: relative gain and a loaded offset, both
  /// drawn once per generated trace.
  double gain_sigma = 0.0;
  double offset_sigma_grams = 0.0;
};

struct Scenario {
  StationId station_id = 1;
  Millis duration_ms = 3'600'000;
  Seconds clock_origin_s = 1'767'225'600;  // 2026-01-01T00:00:00Z
  std::vector<Animal> animals;
  std::vector<ScheduledVisit> visits;
  std::vector<RandomVisits> random_visits;
  NoiseModel noise;
  double p_detect = 1.0;
  uplinkqueue::LinkModel link;
  std::optional<std::uint32_t> max_attempts;
  Millis ramp_ms = 500;
  Millis sample_period_ms = 50;
  /// Emit samples only within `sparse_margin_ms` of a visit. Long idle
  /// stretches cost nothing then; timers still run on the virtual clock.
  bool sparse_idle = false;
  Millis sparse_margin_ms = 10'000;
  /// Queue drain time after the scenario ends before results are read.
  Millis drain_ms = 3'600'000;

  /// Throws ScenarioError.
  void validate() const;
  const Animal& animal(std::string_view name) const;
};

/// Key-value text with repeatable `animal`, `visit` and `random_visits`
/// lines (see docs/formats.md). Throws ScenarioError with a line number.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

struct TruthVisit {
  std::string animal;
  std::optional<TagId> tag;
  Millis entry_ms = 0;
  Millis exit_ms = 0;
  double weight_grams = 0.0;
};

struct Trace {
  std::vector<StationInput> inputs;
  std::vector<TruthVisit> truth;  // ordered by entry
};

/// Expands random visits into a schedule: any two entry/exit events at least
/// `min_event_gap_ms` apart and never more than three animals on the scale.
std::vector<ScheduledVisit> expand_schedule(const Scenario& scenario, std::uint64_t seed,
                                            Millis min_event_gap_ms = 3'000);

Trace generate_trace(const Scenario& scenario, std::uint64_t seed);

struct Interval {
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ScenarioReport {
  std::size_t truth_visits = 0;
  std::size_t station_visits = 0;
  std::size_t server_visits = 0;
  std::size_t matched_visits = 0;
  std::size_t tagged_truth = 0;
  std::size_t tags_detected = 0;
  std::size_t tags_correct = 0;
  std::vector<double> weight_errors;  // |server - truth| per matched visit
  std::optional<Interval> mean_abs_error;
  std::optional<Interval> detection_rate;
  std::optional<Interval> tag_accuracy;
  std::size_t uplinks_enqueued = 0;
  std::size_t uplinks_delivered = 0;  // distinct seqs stored by the server
  std::size_t transmissions = 0;
  std::size_t queue_left = 0;
  std::size_t parked = 0;
  std::optional<Interval> delivery_rate;
  std::size_t system_updates = 0;  // received by the server
  std::size_t captures = 0;
  std::vector<server::StoredVisit> visits;

  /// Human-readable table, every line prefixed with "# ".
  std::string table() const;
  /// `metric value` lines, one per metric.
  std::string lines() const;
};

/// Runs station + link + server over the scenario's generated trace.
ScenarioReport run_scenario(const Scenario& scenario, std::uint64_t seed, Logger* log = nullptr);

/// Same pipeline on a recorded trace; ground-truth metrics stay empty.
ScenarioReport replay(const std::vector<StationInput>& inputs, const StationConfig& config, std::uint64_t seed,
                      Logger* log = nullptr);

/// Wilson score interval at 95 %.
Interval wilson(std::size_t successes, std::size_t n);

// Fixtures ------------------------------------------------------------------

struct WeighingCondition {
  double weight_grams = 40.0;
  bool moving = false;
  double mean_abs_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t runs = 0;
  std::size_t missed = 0;  // runs where no visit came out
};

/// The calibrated noise model of the weighing accuracy fixture.
NoiseModel weighing_fixture_noise(bool moving);
/// One run: 40/50/100 g held 10 s (stable) or moved 20 s.
Scenario weighing_fixture_scenario(double weight_grams, bool moving);
/// All six conditions, `runs` each.
std::vector<WeighingCondition> run_weighing_fixture(std::size_t runs, std::uint64_t seed);

struct DailyStats {
  std::int64_t day = 0;
  double min_grams = 0.0;
  double avg_grams = 0.0;
  double max_grams = 0.0;
  std::size_t visits = 0;
};

/// Per-day min/avg/max over server visits, by entry time.
std::vector<DailyStats> daily_series(const std::vector<server::StoredVisit>& visits, std::optional<TagId> tag = {});

}  // namespace feeder::sim

#endif  // FEEDER_SIMHARNESS_HPP
