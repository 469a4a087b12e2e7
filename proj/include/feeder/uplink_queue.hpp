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

// Persistent store-and-forward queue with confirmed-uplink retransmission.
//
// Only the head of the queue is ever on the air, so first receptions arrive
// in enqueue order. Every state change is appended to a log file (see
// docs/formats.md) before the call returns; reopening the queue replays the
// log, drops a torn tail record and compacts.

#ifndef FEEDER_UPLINK_QUEUE_HPP
#define FEEDER_UPLINK_QUEUE_HPP

#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "feeder/hex.hpp"
#include "feeder/link.hpp"
#include "feeder/types.hpp"

namespace feeder::uplinkqueue {

enum class EntryState : std::uint8_t {
  kPending = 0,
  kInFlight = 1,
  kConfirmed = 2,
  kParked = 3,
};

struct QueueEntry {
  std::uint16_t seq = 0;
  Bytes payload;
  Millis enqueued_ts = 0;
  std::uint32_t attempts = 0;
  EntryState state = EntryState::kPending;
  Millis next_attempt_at = 0;
  Millis timeout_at = 0;
  std::optional<Millis> confirm_at;
  std::optional<Bytes> downlink;
};

struct RetryPolicy {
  Millis confirm_timeout_ms = 5000;
  Millis backoff_base_ms = 5000;
  Millis backoff_cap_ms = 80000;
  /// Total transmissions per entry; unbounded when empty.
  std::optional<std::uint32_t> max_attempts;

  Millis backoff_after(std::uint32_t attempts) const;
};

struct QueueMetrics {
  std::uint64_t enqueued = 0;
  std::uint64_t transmissions = 0;
  std::uint64_t confirmed = 0;
  std::uint64_t parked = 0;
  std::uint64_t unknown_confirms = 0;
  std::uint64_t duplicate_confirms = 0;
};

struct TxEvent {
  enum class Kind { kTransmit, kConfirmed, kTimeout, kParked };
  Kind kind = Kind::kTransmit;
  std::uint16_t seq = 0;
  Millis ts = 0;
  std::uint32_t attempt = 0;
  std::optional<Bytes> downlink;  // on kConfirmed, when the ack carried one
};

class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxPayload = 51;

class UplinkQueue {
 public:
  /// Without a path the queue lives in memory only.
  explicit UplinkQueue(RetryPolicy policy = {}, std::optional<std::filesystem::path> log_path = {});
  ~UplinkQueue();
  UplinkQueue(const UplinkQueue&) = delete;
  UplinkQueue& operator=(const UplinkQueue&) = delete;
  UplinkQueue(UplinkQueue&&) noexcept;
  UplinkQueue& operator=(UplinkQueue&&) noexcept;

  std::uint16_t next_seq() const { return next_seq_; }

  /// Appends a payload under next_seq() and returns that seq. Throws
  /// RangeError when the payload exceeds 51 bytes, StorageError when the log
  /// write fails.
  std::uint16_t enqueue(Bytes payload, Millis now);

  /// Advances the head entry to `now`: delivers due confirmations, handles
  /// timeouts, and transmits when the duty-cycle gap allows.
  std::vector<TxEvent> pump(LossyLink& link, Millis now);

  /// Marks an in-flight seq confirmed and removes it. Duplicates and unknown
  /// seqs only touch the metrics.
  void confirm(std::uint16_t seq, Millis now);

  /// Earliest time pump() has something to do; nullopt when empty.
  std::optional<Millis> next_wakeup() const;

  bool empty() const { return live_.empty(); }
  std::size_t size() const { return live_.size(); }
  const std::deque<QueueEntry>& entries() const { return live_; }
  const std::vector<QueueEntry>& parked() const { return parked_; }
  const QueueMetrics& metrics() const { return metrics_; }
  const RetryPolicy& policy() const { return policy_; }

  /// True if an entry was parked since the last call.
  bool take_undelivered_flag();

 private:
  void append_record(std::uint16_t seq, EntryState state, std::uint32_t attempts, std::span<const std::uint8_t> payload);
  void recover();
  void compact();
  void remove_head(EntryState final_state, Millis now, std::vector<TxEvent>& events);

  RetryPolicy policy_;
  std::optional<std::filesystem::path> path_;
  std::FILE* file_ = nullptr;
  std::deque<QueueEntry> live_;
  std::vector<QueueEntry> parked_;
  std::uint16_t next_seq_ = 0;
  std::optional<Millis> last_tx_;
  Millis gap_ms_ = 0;
  QueueMetrics metrics_;
  bool undelivered_flag_ = false;
  std::vector<std::uint16_t> recently_confirmed_;
};

}  // namespace feeder::uplinkqueue

#endif  // FEEDER_UPLINK_QUEUE_HPP
