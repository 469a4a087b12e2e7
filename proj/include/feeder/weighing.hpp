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

// State-based weighing engine for the feeding-station scale.
//
// The engine consumes a 20 Hz stream of load-cell readings and segments it
// into measurement periods separated by weight shifts. Each period's stable
// weight is the mean of the samples that fall inside stability windows
// (runs where consecutive readings differ by at most 1 g for at least 1 s).
// When the last animal leaves, per-animal weights are recovered from the
// shifts between consecutive periods.
//
//   Idle --(+20 g held for 1 s)--> Entrance --> Weighing
//   Weighing --(+20 g held for 1 s)--> Entrance --> Weighing
//   Weighing --(1 s window mean below level - 20 g)--> Exit --> Weighing | Idle
//
// Entrance and Exit are transient: they are reported as events and the
// engine settles in Weighing or Idle within the same ingest call.

#ifndef FEEDER_WEIGHING_HPP
#define FEEDER_WEIGHING_HPP

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "feeder/types.hpp"

namespace feeder::weighing {

struct WeightSample {
  Millis t = 0;
  double grams = 0.0;

  friend bool operator==(const WeightSample&, const WeightSample&) = default;
};

struct StabilityParams {
  double max_step_grams = 1.0;
  /// Minimum window length in samples; 1 s at 20 Hz.
  std::size_t min_samples = 20;
};

struct StabilityWindow {
  std::size_t start_index = 0;  // inclusive
  std::size_t end_index = 0;    // inclusive
  double mean_grams = 0.0;
  double std_grams = 0.0;

  std::size_t size() const { return end_index - start_index + 1; }
  friend bool operator==(const StabilityWindow&, const StabilityWindow&) = default;
};

struct StableWeight {
  double grams = 0.0;
  double std_grams = 0.0;
};

/// All maximal runs whose consecutive differences stay within
/// `max_step_grams` and that hold at least `min_samples` samples. Disjoint and
/// ordered by start.
std::vector<StabilityWindow> find_stability_windows(std::span<const WeightSample> samples,
                                                    const StabilityParams& params = {});

/// Mean and population standard deviation over every sample inside the
/// given windows; nullopt when there are no windows.
std::optional<StableWeight> stable_weight(std::span<const WeightSample> samples,
                                          std::span<const StabilityWindow> windows);

struct MeasurementPeriod {
  std::vector<WeightSample> samples;
  std::optional<double> stable_weight_grams;
  std::optional<double> quality_std_grams;

  /// Builds a period and fills in its stable weight from the samples.
  static MeasurementPeriod from_samples(std::vector<WeightSample> samples,
                                        const StabilityParams& params = {});

  /// Median of the raw samples; used when no stability window exists.
  std::optional<double> median_grams() const;
};

enum class ShiftKind { kEntrance, kExit };

struct ShiftEvent {
  ShiftKind kind = ShiftKind::kEntrance;
  Millis ts = 0;
};

struct AttributionParams {
  double pairing_tolerance_grams = 2.0;
};

/// Recovers one visit per entrance from the shifts between consecutive
/// periods. `periods` must hold exactly one more element than `events`
/// (periods[i] precedes events[i]); the event sequence must start with an
/// entrance and leave no animal on the scale. Throws std::invalid_argument
/// otherwise. Each exit goes to the present animal whose entrance shift is
/// closest, the earliest arrival on equal agreement; a best match outside
/// the pairing tolerance is flagged unresolved. Visits are returned in
/// entrance order with no tag assigned.
std::vector<AnimalVisit> attribute_weights(std::span<const MeasurementPeriod> periods,
                                           std::span<const ShiftEvent> events,
                                           const AttributionParams& params = {});

enum class ScaleMode { kIdle, kEntrance, kWeighing, kExit };

std::string_view to_string(ScaleMode mode);

struct ScaleState {
  ScaleMode mode = ScaleMode::kIdle;
  int animal_count = 0;
};

struct EngineConfig {
  double entrance_grams = 20.0;
  StabilityParams stability;
  /// Moving window used for state-change detection, in samples.
  std::size_t window_samples = 20;
  double min_grams = -50.0;
  double max_grams = 6000.0;
  /// Idle drift correction is limited to 1 g per 10 s.
  double tare_rate_grams_per_second = 0.1;
  /// Idle history kept as the baseline period of the next visit group.
  Millis baseline_history_ms = 5000;
  AttributionParams attribution;
  StationId station_id = 0;
};

struct EntranceEvent {
  Millis ts = 0;            // first sample of the shift
  Millis confirmed_ts = 0;  // sample that confirmed it
  int animal_count = 0;     // count after the entrance
};

struct ExitEvent {
  Millis ts = 0;
  Millis confirmed_ts = 0;
  int animal_count = 0;  // count after the exit
};

struct VisitCompleted {
  AnimalVisit visit;
};

struct SensorFault {
  Millis ts = 0;
  double grams = 0.0;
};

struct SampleRejected {
  Millis ts = 0;
  std::string reason;
};

using EngineEvent =
    std::variant<EntranceEvent, ExitEvent, VisitCompleted, SensorFault, SampleRejected>;

class WeighingEngine {
 public:
  explicit WeighingEngine(EngineConfig config = {});

  /// Feeds one raw reading. Returns the events it caused, in order. Visits
  /// are only completed once the animal count is back to zero.
  std::vector<EngineEvent> ingest(const WeightSample& raw);

  /// Moves the tare offset toward the mean of `raw_idle_window`, rate
  /// limited. Outside Idle this is a no-op that bumps warning_count().
  double zero_scale(std::span<const WeightSample> raw_idle_window);

  ScaleState state() const { return {mode_, count_}; }
  double tare() const { return tare_; }
  /// Tared reading of the most recent accepted sample.
  double last_net_grams() const { return last_net_; }
  bool sensor_fault() const { return fault_latched_; }
  void clear_sensor_fault() { fault_latched_ = false; }
  std::size_t warning_count() const { return warnings_; }
  std::size_t entrance_count() const { return entrances_; }
  std::size_t exit_count() const { return exits_; }
  const EngineConfig& config() const { return config_; }

 private:
  void ingest_idle(const WeightSample& net, const WeightSample& raw, std::vector<EngineEvent>& out);
  void ingest_weighing(const WeightSample& net, std::vector<EngineEvent>& out);
  void begin_entrance(std::size_t change_index, Millis confirmed_ts, std::vector<EngineEvent>& out);
  void begin_exit(std::size_t change_index, Millis confirmed_ts, std::vector<EngineEvent>& out);
  void close_period(std::size_t change_index);
  void finish_group(std::vector<EngineEvent>& out);
  void track_runs(const WeightSample& net, std::span<const WeightSample> buffer);
  void reset_runs();
  double window_mean() const;

  EngineConfig config_;
  ScaleMode mode_ = ScaleMode::kIdle;
  int count_ = 0;
  double tare_ = 0.0;
  bool rezero_pending_ = true;
  std::optional<Millis> last_zero_t_;
  std::optional<Millis> last_t_;
  double last_net_ = 0.0;
  bool fault_latched_ = false;
  std::size_t warnings_ = 0;
  std::size_t entrances_ = 0;
  std::size_t exits_ = 0;

  // Reference level shifts are measured against.
  double ref_ = 0.0;
  // Samples left in the post-exit settling window.
  std::size_t settle_left_ = 0;

  // Idle: tared history (baseline for the next group) and raw tail for zeroing.
  std::deque<WeightSample> idle_;
  std::deque<WeightSample> idle_raw_;

  // Weighing: the open period and the closed periods of the current group.
  std::vector<WeightSample> current_;
  std::vector<MeasurementPeriod> periods_;
  std::vector<ShiftEvent> events_;

  // Trailing run bookkeeping over the active buffer.
  std::size_t up_run_ = 0;
  std::size_t down_run_ = 0;
  std::size_t stable_run_ = 0;
};

}  // namespace feeder::weighing

#endif  // FEEDER_WEIGHING_HPP
