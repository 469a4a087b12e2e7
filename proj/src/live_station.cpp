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

#include <fmt/format.h>

#include "feeder/channel.hpp"
#include "feeder/rfid.hpp"
#include "feeder/station.hpp"

namespace feeder::station {

namespace {

struct EngineBatch {
  std::vector<weighing::EngineEvent> events;
  Millis t = 0;
};
struct Downlink {
  Bytes payload;
  Millis t = 0;
};
struct Undelivered {};
struct StorageFailed {};
struct SourceDone {};
struct QueueDone {
  uplinkqueue::QueueMetrics metrics;
  std::size_t left = 0;
};

using OrchMsg = std::variant<EngineBatch, RfidDetection, FrameInput, RfidFaultInput, EnvInput, Downlink, Undelivered,
                             StorageFailed, SourceDone, QueueDone>;

struct Submit {
  Bytes payload;
  Millis t = 0;
};
struct Tick {
  Millis t = 0;
};
struct Finish {
  Millis t = 0;
};
using QueueMsg = std::variant<Submit, Tick, Finish>;

using RfidMsg = std::variant<RfidDetection, FrameInput, RfidFaultInput>;

// The queue task owns the seq counter; the orchestrator mirrors it because
// both see submissions in the same order.
class ChannelOutbox : public Outbox {
 public:
  ChannelOutbox(Channel<QueueMsg>& ch, std::uint16_t first_seq) : ch_(ch), next_(first_seq) {}

  std::optional<std::uint16_t> submit(codec::Message msg, Millis now) override {
    const std::uint16_t seq = next_;
    std::visit([&](auto& m) {
      if constexpr (!std::is_same_v<std::decay_t<decltype(m)>, codec::TrapUpdate>) m.seq = seq;
    }, msg);
    Bytes payload;
    try {
      payload = codec::encode(msg);
    } catch (const RangeError&) {
      return std::nullopt;
    }
    if (!ch_.send(Submit{std::move(payload), now})) return std::nullopt;
    ++next_;
    return seq;
  }

 private:
  Channel<QueueMsg>& ch_;
  std::uint16_t next_;
};

void queue_task(uplinkqueue::UplinkQueue& queue, uplinkqueue::LossyLink& link, Channel<QueueMsg>& in,
                Channel<OrchMsg>& out, Logger* log) {
  auto pump_to = [&](Millis t) {
    while (auto wake = queue.next_wakeup()) {
      if (*wake > t) break;
      std::vector<uplinkqueue::TxEvent> events;
      try {
        events = queue.pump(link, *wake);
      } catch (const uplinkqueue::StorageError& e) {
        if (log) log->error(*wake, "uplinkqueue", e.what());
        out.send(StorageFailed{});
        return;
      }
      for (auto& ev : events) {
        if (ev.kind == uplinkqueue::TxEvent::Kind::kConfirmed && ev.downlink) {
          out.send(Downlink{std::move(*ev.downlink), ev.ts});
        }
      }
      if (queue.take_undelivered_flag()) out.send(Undelivered{});
    }
  };

  while (auto msg = in.receive()) {
    if (auto* s = std::get_if<Submit>(&*msg)) {
      try {
        queue.enqueue(std::move(s->payload), s->t);
      } catch (const uplinkqueue::StorageError& e) {
        if (log) log->error(s->t, "uplinkqueue", e.what());
        out.send(StorageFailed{});
      }
      pump_to(s->t);
    } else if (auto* t = std::get_if<Tick>(&*msg)) {
      pump_to(t->t);
    } else if (auto* f = std::get_if<Finish>(&*msg)) {
      pump_to(f->t);
      out.send(QueueDone{queue.metrics(), queue.size()});
    }
  }
}

}  // namespace

LiveResult run_live(const StationConfig& config, const std::vector<StationInput>& inputs, uplinkqueue::LossyLink& link,
                    Millis t0, Millis t_end, Logger* log, Millis drain_ms) {
  Channel<weighing::WeightSample> weigh_in;
  Channel<RfidMsg> rfid_in;
  Channel<OrchMsg> orch_in;
  Channel<QueueMsg> queue_in;

  uplinkqueue::UplinkQueue queue(config.retry, config.queue_path);
  ChannelOutbox outbox(queue_in, queue.next_seq());
  Orchestrator orch(config, log);
  LiveResult result;

  std::thread weighing_thread([&] {
    weighing::WeighingEngine engine(config.engine_config());
    while (auto s = weigh_in.receive()) orch_in.send(EngineBatch{engine.ingest(*s), s->t});
    orch_in.send(SourceDone{});
  });

  std::thread rfid_thread([&] {
    while (auto m = rfid_in.receive()) {
      if (auto* f = std::get_if<FrameInput>(&*m)) {
        const auto r = rfid::decode_frame(f->frame);
        if (r.status == rfid::FrameStatus::kOk && r.frame->flags.animal) {
          orch_in.send(RfidDetection{r.frame->tag, f->ts, config.station_id});
        } else {
          orch_in.send(*f);  // counted as a bad frame by the orchestrator
        }
      } else {
        std::visit([&](const auto& v) { orch_in.send(v); }, *m);
      }
    }
    orch_in.send(SourceDone{});
  });

  std::thread queue_thread([&] { queue_task(queue, link, queue_in, orch_in, log); });

  std::thread orch_thread([&] {
    orch.start(t0, outbox);
    queue_in.send(Tick{t0});
    int sources_left = 2;
    bool finishing = false;
    Millis now = t0;
    while (auto msg = orch_in.receive()) {
      bool done = false;
      std::visit(
          [&](auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, EngineBatch>) {
              now = std::max(now, m.t);
              orch.on_engine_events(m.events, m.t, outbox);
            } else if constexpr (std::is_same_v<T, RfidDetection>) {
              now = std::max(now, m.ts);
              orch.on_detection(m, outbox);
            } else if constexpr (std::is_same_v<T, FrameInput>) {
              orch.on_frame(m, outbox);
            } else if constexpr (std::is_same_v<T, RfidFaultInput>) {
              orch.on_rfid_fault(m);
            } else if constexpr (std::is_same_v<T, EnvInput>) {
              orch.on_env(m);
            } else if constexpr (std::is_same_v<T, Downlink>) {
              orch.on_downlink(m.payload, std::max(now, m.t), outbox);
            } else if constexpr (std::is_same_v<T, Undelivered>) {
              orch.on_undelivered();
            } else if constexpr (std::is_same_v<T, StorageFailed>) {
              orch.on_storage_error();
            } else if constexpr (std::is_same_v<T, SourceDone>) {
              if (--sources_left == 0) {
                finishing = true;
                orch.flush(t_end, outbox);
                now = t_end;
                queue_in.send(Finish{t_end + drain_ms});
              }
            } else if constexpr (std::is_same_v<T, QueueDone>) {
              result.queue = m.metrics;
              result.queue_left = m.left;
              done = true;
            }
          },
          *msg);
      if (done) break;
      if (!finishing) queue_in.send(Tick{now});
    }
    queue_in.close();
  });

  // Driver: hand every input to the task that owns its kind.
  for (const auto& in : inputs) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, weighing::WeightSample>) {
            weigh_in.send(v);
          } else if constexpr (std::is_same_v<T, EnvInput>) {
            orch_in.send(v);
          } else {
            rfid_in.send(v);
          }
        },
        in);
  }
  weigh_in.close();
  rfid_in.close();

  weighing_thread.join();
  rfid_thread.join();
  orch_thread.join();
  queue_thread.join();
  orch_in.close();

  result.metrics = orch.metrics();
  result.visits = orch.visits();
  result.sent = orch.sent();
  if (log) log->info(t_end, "station", fmt::format("live run finished, {} visits", result.visits.size()));
  return result;
}

}  // namespace feeder::station
