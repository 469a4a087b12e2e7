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

#include "feeder/station.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "feeder/rfid.hpp"

namespace feeder::station {

namespace {
constexpr std::string_view kModule = "station";
}

codec::AnimalUpdate to_animal_update(const AnimalVisit& visit, const StationConfig& config) {
  codec::AnimalUpdate u;
  u.tag = visit.tag;
  u.entry_ts = config.wire_time(visit.entry_ts);
  u.exit_ts = config.wire_time(visit.exit_ts);
  u.weight = codec::weight_units(visit.weight_grams);
  u.std = codec::std_units(visit.quality_std_grams);
  return u;
}

Orchestrator::Orchestrator(StationConfig config, Logger* log)
    : config_(std::move(config)), log_(log), trap_(trapctl::DoorController{}, config_.station_id) {
  config_.validate();
  if (config_.trapdb_path) db_ = trapctl::load_database(*config_.trapdb_path);
  trap_.door().calibrate();
}

void Orchestrator::start(Millis t0, Outbox& out) {
  t0_ = t0;
  now_ = t0;
  started_ = true;
  next_sync_ = t0 + config_.db_sync_period_ms;
  if (trap_.fault() && log_) log_->error(t0, "trapctl", "door calibration failed");
  send_sync(t0, out);
}

void Orchestrator::submit(codec::Message msg, Millis now, Outbox& out) {
  const auto seq = out.submit(msg, now);
  if (!seq) {
    ++metrics_.submit_failures;
    return;
  }
  std::visit([&](auto& m) {
    if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, codec::TrapUpdate>) m.seq = *seq;
  }, msg);
  if (log_) log_->log(now, LogLevel::kDebug, "uplink", codec::describe(msg));
  sent_.push_back({*seq, now, std::move(msg)});
}

std::uint16_t Orchestrator::current_error_flags() const {
  std::uint16_t flags = latched_flags_;
  if (rfid_down_) flags |= codec::kErrRfidFault;
  if (trap_.fault()) flags |= codec::kErrDoorFault;
  if (env_.rh_in > config_.humidity_alarm_percent) flags |= codec::kErrHumidityIngress;
  return flags;
}

void Orchestrator::send_system_update(Millis now, Outbox& out) {
  codec::SystemUpdate u;
  u.ts = config_.wire_time(now);
  u.temp_in = codec::temperature_units(env_.temp_in);
  u.temp_out = codec::temperature_units(env_.temp_out);
  u.rh_in = codec::humidity_units(env_.rh_in);
  u.rh_out = codec::humidity_units(env_.rh_out);
  u.error_flags = current_error_flags();
  latched_flags_ = 0;
  ++metrics_.system_updates;
  submit(u, now, out);
}

void Orchestrator::send_sync(Millis now, Outbox& out) {
  sync_requested_ = false;
  sync_outstanding_ = true;
  sync_deadline_ = now + 2 * config_.system_update_period_ms;
  ++metrics_.db_sync_requests;
  submit(codec::DbSyncRequest{0, db_.last_updated}, now, out);
}

void Orchestrator::handle_capture(const std::optional<trapctl::CaptureEvent>& capture, Outbox& out) {
  if (!capture) {
    if (trap_.fault() && log_) log_->error(now_, "trapctl", "door fault during activation");
    return;
  }
  if (log_) {
    log_->info(capture->ts, "trapctl",
               fmt::format("capture tag={}", capture->tag ? capture->tag->str() : std::string("untagged")));
  }
  ++metrics_.trap_events;
  submit(codec::TrapEvent{0, config_.wire_time(capture->ts), capture->tag}, capture->ts, out);
  // Operators are likely to change targets after a capture.
  sync_requested_ = true;
}

void Orchestrator::on_engine_events(const std::vector<weighing::EngineEvent>& events, Millis now, Outbox& out) {
  now_ = std::max(now_, now);
  ++metrics_.samples;
  PendingBatch batch;
  for (const auto& ev : events) {
    if (const auto* e = std::get_if<weighing::EntranceEvent>(&ev)) {
      if (e->animal_count == 1) group_start_ = e->ts;
      if (log_) log_->log(e->confirmed_ts, LogLevel::kDebug, "weighing", fmt::format("entrance count={}", e->animal_count));
      // No read anywhere near the entrance: the animal carries no readable chip.
      const bool read_nearby = std::any_of(detections_.begin(), detections_.end(), [&](const RfidDetection& d) {
        return d.ts >= e->ts - config_.rfid_match_window_ms && d.ts <= e->confirmed_ts;
      });
      if (!read_nearby && !rfid_down_) handle_capture(trap_.on_untagged_entrance(db_, e->confirmed_ts), out);
    } else if (const auto* x = std::get_if<weighing::ExitEvent>(&ev)) {
      if (log_) log_->log(x->confirmed_ts, LogLevel::kDebug, "weighing", fmt::format("exit count={}", x->animal_count));
      if (x->animal_count == 0) group_start_.reset();
    } else if (const auto* v = std::get_if<weighing::VisitCompleted>(&ev)) {
      ++metrics_.visits_completed;
      batch.visits.push_back(v->visit);
      batch.ready_at = std::max(batch.ready_at, v->visit.exit_ts + config_.rfid_match_window_ms);
    } else if (const auto* f = std::get_if<weighing::SensorFault>(&ev)) {
      latched_flags_ |= codec::kErrScaleFault;
      if (log_) log_->warn(f->ts, "weighing", fmt::format("sensor fault reading {:.1f} g", f->grams));
    } else if (const auto* r = std::get_if<weighing::SampleRejected>(&ev)) {
      ++metrics_.rejected_samples;
      if (log_) log_->warn(r->ts, "weighing", r->reason);
    }
  }
  if (!batch.visits.empty()) pending_.push_back(std::move(batch));
  advance(now, out);
}

void Orchestrator::on_detection(const RfidDetection& detection, Outbox& out) {
  now_ = std::max(now_, detection.ts);
  ++metrics_.detections;
  detections_.push_back(detection);
  if (log_) log_->log(detection.ts, LogLevel::kDebug, "rfid", fmt::format("read {}", detection.tag.str()));
  handle_capture(trap_.on_detection(db_, detection), out);
  advance(detection.ts, out);
}

void Orchestrator::on_frame(const FrameInput& frame, Outbox& out) {
  const auto r = rfid::decode_frame(frame.frame);
  if (r.status != rfid::FrameStatus::kOk || !r.frame->flags.animal) {
    ++metrics_.bad_frames;
    if (log_) log_->log(frame.ts, LogLevel::kDebug, "rfid", fmt::format("dropped frame: {}", rfid::to_string(r.status)));
    return;
  }
  on_detection(RfidDetection{r.frame->tag, frame.ts, config_.station_id}, out);
}

void Orchestrator::on_rfid_fault(const RfidFaultInput& fault) {
  if (fault.down != rfid_down_ && log_) {
    log_->log(fault.ts, fault.down ? LogLevel::kError : LogLevel::kInfo, "rfid",
              fault.down ? "reader lost, visits continue untagged" : "reader restored");
  }
  rfid_down_ = fault.down;
  if (fault.down) latched_flags_ |= codec::kErrRfidFault;
}

void Orchestrator::on_env(const EnvInput& env) { env_ = env.env; }

void Orchestrator::on_undelivered() { latched_flags_ |= codec::kErrUplinkUndelivered; }

void Orchestrator::on_storage_error() { latched_flags_ |= codec::kErrQueueStorage; }

void Orchestrator::reset_trap() { trap_.reset(); }

void Orchestrator::on_downlink(const Bytes& payload, Millis now, Outbox& out) {
  now_ = std::max(now_, now);
  codec::Message msg;
  try {
    msg = codec::decode(payload);
  } catch (const codec::DecodeError& e) {
    if (log_) log_->warn(now, "sync", fmt::format("undecodable downlink {}: {}", to_hex(payload), e.what()));
    return;
  }
  const auto* update = std::get_if<codec::TrapUpdate>(&msg);
  if (update == nullptr) {
    if (log_) log_->warn(now, "sync", "downlink is not a TrapUpdate");
    return;
  }
  if (trapctl::is_stale(db_, *update)) {
    ++metrics_.stale_trap_updates;
    if (log_) log_->warn(now, "sync", fmt::format("ignored stale update server_time={}", update->server_time));
    sync_outstanding_ = false;
    return;
  }
  db_ = trapctl::apply_trap_update(db_, *update);
  ++metrics_.trap_updates_applied;
  if (config_.trapdb_path) {
    try {
      trapctl::save_database(db_, *config_.trapdb_path);
    } catch (const std::exception& e) {
      if (log_) log_->error(now, "trapctl", e.what());
    }
  }
  if (log_) {
    log_->info(now, "sync", fmt::format("applied {} ops, last_updated={}, {} tags{}", update->ops.size(),
                                        db_.last_updated, db_.entries.size(), update->more_follows ? ", more" : ""));
  }
  if (update->more_follows) {
    send_sync(now, out);
  } else {
    sync_outstanding_ = false;
  }
}

void Orchestrator::prune_detections(Millis now) {
  Millis keep_from = now - config_.rfid_match_window_ms;
  if (group_start_) keep_from = std::min(keep_from, *group_start_ - config_.rfid_match_window_ms);
  for (const auto& b : pending_) {
    for (const auto& v : b.visits) keep_from = std::min(keep_from, v.entry_ts - config_.rfid_match_window_ms);
  }
  while (!detections_.empty() && detections_.front().ts < keep_from) detections_.pop_front();
}

void Orchestrator::emit_batch(PendingBatch batch, Millis now, Outbox& out) {
  Millis lo = batch.visits.front().entry_ts;
  Millis hi = batch.visits.front().exit_ts;
  for (const auto& v : batch.visits) {
    lo = std::min(lo, v.entry_ts);
    hi = std::max(hi, v.exit_ts);
  }
  lo -= config_.rfid_match_window_ms;
  hi += config_.rfid_match_window_ms;

  std::vector<RfidDetection> candidates;
  std::vector<std::size_t> origin;
  for (std::size_t i = 0; i < detections_.size(); ++i) {
    if (detections_[i].ts >= lo && detections_[i].ts <= hi) {
      candidates.push_back(detections_[i]);
      origin.push_back(i);
    }
  }
  auto result = rfid::match_detections(std::move(batch.visits), candidates, config_.rfid_match_window_ms);
  std::vector<std::size_t> used;
  for (auto c : result.consumed) used.push_back(origin[c]);
  std::sort(used.rbegin(), used.rend());
  for (auto i : used) detections_.erase(detections_.begin() + static_cast<std::ptrdiff_t>(i));

  for (auto& v : result.visits) {
    v.station_id = config_.station_id;
    if (log_) {
      log_->info(now, "station",
                 fmt::format("visit tag={} weight={:.1f} g std={:.2f} g entry={} exit={}",
                             v.tag ? v.tag->str() : std::string("untagged"), v.weight_grams, v.quality_std_grams,
                             v.entry_ts, v.exit_ts));
    }
    ++metrics_.animal_updates;
    submit(to_animal_update(v, config_), now, out);
    visits_.push_back(std::move(v));
  }
}

void Orchestrator::advance(Millis now, Outbox& out) {
  if (!started_) return;
  now_ = std::max(now_, now);
  if (sync_outstanding_ && now_ >= sync_deadline_) {
    // Quiet link; the next scheduled cycle asks again.
    sync_outstanding_ = false;
    if (log_) log_->info(sync_deadline_, "sync", "no downlink within two periods");
  }
  while (t0_ + (system_updates_sent_ + 1) * config_.system_update_period_ms <= now_) {
    ++system_updates_sent_;
    send_system_update(t0_ + system_updates_sent_ * config_.system_update_period_ms, out);
  }
  while (next_sync_ <= now_) {
    next_sync_ += config_.db_sync_period_ms;
    sync_requested_ = true;
  }
  if (sync_requested_ && !sync_outstanding_) send_sync(now_, out);

  while (!pending_.empty() && pending_.front().ready_at <= now_) {
    auto batch = std::move(pending_.front());
    pending_.erase(pending_.begin());
    emit_batch(std::move(batch), now_, out);
  }
  prune_detections(now_);
}

std::optional<Millis> Orchestrator::next_timer() const {
  if (!started_) return std::nullopt;
  Millis next = t0_ + (system_updates_sent_ + 1) * config_.system_update_period_ms;
  next = std::min(next, next_sync_);
  if (sync_outstanding_) next = std::min(next, sync_deadline_);
  if (sync_requested_ && !sync_outstanding_) next = std::min(next, now_);
  if (!pending_.empty()) next = std::min(next, pending_.front().ready_at);
  return next;
}

void Orchestrator::flush(Millis now, Outbox& out) {
  advance(now, out);
  while (!pending_.empty()) {
    auto batch = std::move(pending_.front());
    pending_.erase(pending_.begin());
    emit_batch(std::move(batch), now_, out);
  }
}

// ---------------------------------------------------------------------------

Station::Station(StationConfig config, uplinkqueue::LossyLink& link, Logger* log)
    : config_(config),
      log_(log),
      link_(link),
      engine_(config.engine_config()),
      queue_(config.retry, config.queue_path),
      orch_(config, log) {}

void Station::start(Millis t0) {
  now_ = t0;
  if (log_) log_->info(t0, kModule, fmt::format("station {} starting", config_.station_id));
  orch_.start(t0, *this);
  advance_to(t0);
}

std::optional<std::uint16_t> Station::submit(codec::Message msg, Millis now) {
  const std::uint16_t seq = queue_.next_seq();
  std::visit([&](auto& m) {
    if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, codec::TrapUpdate>) m.seq = seq;
  }, msg);
  try {
    queue_.enqueue(codec::encode(msg), now);
  } catch (const uplinkqueue::StorageError& e) {
    if (log_) log_->error(now, "uplinkqueue", e.what());
    orch_.on_storage_error();
    return std::nullopt;
  } catch (const RangeError& e) {
    if (log_) log_->error(now, "codec", e.what());
    return std::nullopt;
  }
  return seq;
}

void Station::pump(Millis now) {
  std::vector<uplinkqueue::TxEvent> events;
  try {
    events = queue_.pump(link_, now);
  } catch (const uplinkqueue::StorageError& e) {
    if (log_) log_->error(now, "uplinkqueue", e.what());
    orch_.on_storage_error();
    return;
  }
  for (const auto& ev : events) {
    if (ev.kind == uplinkqueue::TxEvent::Kind::kConfirmed && ev.downlink) orch_.on_downlink(*ev.downlink, ev.ts, *this);
    if (ev.kind == uplinkqueue::TxEvent::Kind::kParked && log_) {
      log_->warn(ev.ts, "uplinkqueue", fmt::format("seq {} parked after {} attempts", ev.seq, ev.attempt));
    }
  }
  if (queue_.take_undelivered_flag()) orch_.on_undelivered();
}

void Station::advance_to(Millis t) {
  while (true) {
    std::optional<Millis> next = orch_.next_timer();
    if (auto q = queue_.next_wakeup(); q && (!next || *q < *next)) next = q;
    if (!next || *next > t) break;
    now_ = std::max(now_, *next);
    pump(now_);
    orch_.advance(now_, *this);
  }
  now_ = std::max(now_, t);
}

void Station::feed(const StationInput& input) {
  const Millis t = input_time(input);
  advance_to(t);
  std::visit(
      [&](const auto& in) {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, weighing::WeightSample>) {
          auto events = engine_.ingest(in);
          orch_.on_engine_events(events, now_, *this);
        } else if constexpr (std::is_same_v<T, RfidDetection>) {
          orch_.on_detection(in, *this);
        } else if constexpr (std::is_same_v<T, FrameInput>) {
          orch_.on_frame(in, *this);
        } else if constexpr (std::is_same_v<T, RfidFaultInput>) {
          orch_.on_rfid_fault(in);
        } else {
          orch_.on_env(in);
        }
      },
      input);
  advance_to(now_);
}

void Station::finish(Millis t_end) {
  advance_to(t_end);
  orch_.flush(now_, *this);
  advance_to(t_end);
}

void Station::drain(Millis until) {
  while (auto wake = queue_.next_wakeup()) {
    if (*wake > until) break;
    now_ = std::max(now_, *wake);
    pump(now_);
  }
}

}  // namespace feeder::station
