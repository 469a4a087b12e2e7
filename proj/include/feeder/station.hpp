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

// The station daemon. Orchestrator holds the routing and scheduling logic
// and owns nothing that talks to hardware; Station drives it together with
// the weighing engine and the uplink queue on one thread over a simulated
// clock, and run_live() runs the same pieces as separate tasks connected by
// channels.

#ifndef FEEDER_STATION_HPP
#define FEEDER_STATION_HPP

#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "feeder/codec.hpp"
#include "feeder/config.hpp"
#include "feeder/link.hpp"
#include "feeder/log.hpp"
#include "feeder/trace.hpp"
#include "feeder/trapctl.hpp"
#include "feeder/uplink_queue.hpp"
#include "feeder/weighing.hpp"

namespace feeder::station {

/// Where the orchestrator hands outgoing uplinks. The owner of the queue
/// assigns the sequence number.
class Outbox {
 public:
  virtual ~Outbox() = default;
  /// Returns the assigned seq, or nullopt if the message could not be queued.
  virtual std::optional<std::uint16_t> submit(codec::Message msg, Millis now) = 0;
};

struct StationMetrics {
  std::size_t samples = 0;
  std::size_t rejected_samples = 0;
  std::size_t visits_completed = 0;
  std::size_t animal_updates = 0;
  std::size_t system_updates = 0;
  std::size_t db_sync_requests = 0;
  std::size_t trap_events = 0;
  std::size_t trap_updates_applied = 0;
  std::size_t stale_trap_updates = 0;
  std::size_t detections = 0;
  std::size_t bad_frames = 0;
  std::size_t submit_failures = 0;
};

/// A message the station queued, kept for accounting.
struct SentRecord {
  std::uint16_t seq = 0;
  Millis ts = 0;
  codec::Message msg;
};

class Orchestrator {
 public:
  explicit Orchestrator(StationConfig config, Logger* log = nullptr);

  /// Starts the clocks: SystemUpdate at t0 + k * period (k >= 1) and a
  /// database sync right away.
  void start(Millis t0, Outbox& out);

  void on_engine_events(const std::vector<weighing::EngineEvent>& events, Millis now, Outbox& out);
  void on_detection(const RfidDetection& detection, Outbox& out);
  void on_frame(const FrameInput& frame, Outbox& out);
  void on_rfid_fault(const RfidFaultInput& fault);
  void on_env(const EnvInput& env);
  void on_downlink(const Bytes& payload, Millis now, Outbox& out);
  void on_undelivered();
  void on_storage_error();

  /// Runs every timer due at or before `now`.
  void advance(Millis now, Outbox& out);
  /// Earliest pending timer.
  std::optional<Millis> next_timer() const;

  /// Matches and emits every held-back visit regardless of the RFID window
  /// (end of trace).
  void flush(Millis now, Outbox& out);

  /// Operator action at the box: reopens the entry tube.
  void reset_trap();

  const trapctl::TrapDatabase& database() const { return db_; }
  trapctl::TrapController& trap() { return trap_; }
  const StationConfig& config() const { return config_; }
  const StationMetrics& metrics() const { return metrics_; }
  const std::vector<AnimalVisit>& visits() const { return visits_; }
  const std::vector<SentRecord>& sent() const { return sent_; }
  std::uint16_t current_error_flags() const;
  bool sync_outstanding() const { return sync_outstanding_; }

 private:
  struct PendingBatch {
    std::vector<AnimalVisit> visits;
    Millis ready_at = 0;
  };

  void submit(codec::Message msg, Millis now, Outbox& out);
  void send_system_update(Millis now, Outbox& out);
  void send_sync(Millis now, Outbox& out);
  void emit_batch(PendingBatch batch, Millis now, Outbox& out);
  void handle_capture(const std::optional<trapctl::CaptureEvent>& capture, Outbox& out);
  void prune_detections(Millis now);

  StationConfig config_;
  Logger* log_;
  trapctl::TrapDatabase db_;
  trapctl::TrapController trap_;

  Millis t0_ = 0;
  bool started_ = false;
  Millis now_ = 0;
  std::int64_t system_updates_sent_ = 0;
  Millis next_sync_ = 0;
  bool sync_outstanding_ = false;
  Millis sync_deadline_ = 0;
  bool sync_requested_ = false;

  std::deque<RfidDetection> detections_;
  std::optional<Millis> group_start_;
  std::vector<PendingBatch> pending_;
  std::vector<AnimalVisit> visits_;
  std::vector<SentRecord> sent_;

  EnvReading env_;
  bool rfid_down_ = false;
  std::uint16_t latched_flags_ = 0;
  StationMetrics metrics_;
};

/// Deterministic single-threaded station over a simulated clock.
class Station : private Outbox {
 public:
  Station(StationConfig config, uplinkqueue::LossyLink& link, Logger* log = nullptr);

  void start(Millis t0);
  /// Advances the clock to the input's time, then routes it.
  void feed(const StationInput& input);
  /// Runs timers and the queue up to and including `t`.
  void advance_to(Millis t);
  /// Advances to `t_end` and releases any held-back visits.
  void finish(Millis t_end);
  /// Lets the queue keep retransmitting until `until` without firing any
  /// station timers; used to let a run settle before reading results.
  void drain(Millis until);

  Orchestrator& orchestrator() { return orch_; }
  const Orchestrator& orchestrator() const { return orch_; }
  weighing::WeighingEngine& engine() { return engine_; }
  uplinkqueue::UplinkQueue& queue() { return queue_; }
  Millis now() const { return now_; }

 private:
  std::optional<std::uint16_t> submit(codec::Message msg, Millis now) override;
  void pump(Millis now);

  StationConfig config_;
  Logger* log_;
  uplinkqueue::LossyLink& link_;
  weighing::WeighingEngine engine_;
  uplinkqueue::UplinkQueue queue_;
  Orchestrator orch_;
  Millis now_ = 0;
};

struct LiveResult {
  StationMetrics metrics;
  std::vector<AnimalVisit> visits;
  std::vector<SentRecord> sent;
  uplinkqueue::QueueMetrics queue;
  std::size_t queue_left = 0;
};

/// Runs the station as one task per sub-system (weighing, RFID, uplink
/// queue, orchestrator) fed from `inputs`. Tasks share no mutable state and
/// talk only through channels; ordering across tasks is not deterministic.
/// After `t_end` the queue keeps retrying for `drain_ms` of simulated time.
LiveResult run_live(const StationConfig& config, const std::vector<StationInput>& inputs,
                    uplinkqueue::LossyLink& link, Millis t0, Millis t_end, Logger* log = nullptr,
                    Millis drain_ms = 0);

/// Converts a completed visit into the uplink for it (seq left zero).
codec::AnimalUpdate to_animal_update(const AnimalVisit& visit, const StationConfig& config);

}  // namespace feeder::station

#endif  // FEEDER_STATION_HPP
