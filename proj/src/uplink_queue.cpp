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

#include "feeder/uplink_queue.hpp"

#include <zlib.h>

#include <algorithm>
#include <fstream>
#include <iterator>
#include <map>

#include <fmt/format.h>

namespace feeder::uplinkqueue {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'Q', '1'};
// Log-only state carrying the next sequence number in the seq field.
constexpr std::uint8_t kSeqMark = 4;
constexpr std::size_t kBodyHeader = 2 + 1 + 4;

void put_be(Bytes& out, std::uint64_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = (v << 8) | in[at + static_cast<std::size_t>(i)];
  return v;
}

std::uint32_t crc_of(std::span<const std::uint8_t> body) {
  return static_cast<std::uint32_t>(::crc32(0L, body.data(), static_cast<uInt>(body.size())));
}

Bytes make_record(std::uint16_t seq, std::uint8_t state, std::uint32_t attempts, std::span<const std::uint8_t> payload) {
  Bytes body;
  put_be(body, seq, 2);
  body.push_back(state);
  put_be(body, attempts, 4);
  body.insert(body.end(), payload.begin(), payload.end());
  Bytes rec;
  put_be(rec, body.size(), 2);
  rec.insert(rec.end(), body.begin(), body.end());
  put_be(rec, crc_of(body), 4);
  return rec;
}

}  // namespace

Millis RetryPolicy::backoff_after(std::uint32_t attempts) const {
  Millis delay = backoff_base_ms;
  for (std::uint32_t i = 1; i < attempts && delay < backoff_cap_ms; ++i) delay *= 2;
  return std::min(delay, backoff_cap_ms);
}

UplinkQueue::UplinkQueue(RetryPolicy policy, std::optional<std::filesystem::path> log_path)
    : policy_(policy), path_(std::move(log_path)) {
  if (path_) {
    recover();
    compact();
  }
}

UplinkQueue::~UplinkQueue() {
  if (file_ != nullptr) std::fclose(file_);
}

UplinkQueue::UplinkQueue(UplinkQueue&& other) noexcept
    : policy_(other.policy_),
      path_(std::move(other.path_)),
      file_(std::exchange(other.file_, nullptr)),
      live_(std::move(other.live_)),
      parked_(std::move(other.parked_)),
      next_seq_(other.next_seq_),
      last_tx_(other.last_tx_),
      gap_ms_(other.gap_ms_),
      metrics_(other.metrics_),
      undelivered_flag_(other.undelivered_flag_),
      recently_confirmed_(std::move(other.recently_confirmed_)) {}

UplinkQueue& UplinkQueue::operator=(UplinkQueue&& other) noexcept {
  if (this != &other) {
    if (file_ != nullptr) std::fclose(file_);
    policy_ = other.policy_;
    path_ = std::move(other.path_);
    file_ = std::exchange(other.file_, nullptr);
    live_ = std::move(other.live_);
    parked_ = std::move(other.parked_);
    next_seq_ = other.next_seq_;
    last_tx_ = other.last_tx_;
    gap_ms_ = other.gap_ms_;
    metrics_ = other.metrics_;
    undelivered_flag_ = other.undelivered_flag_;
    recently_confirmed_ = std::move(other.recently_confirmed_);
  }
  return *this;
}

void UplinkQueue::recover() {
  Bytes data;
  {
    std::ifstream in(*path_, std::ios::binary);
    if (in) data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  if (data.size() < sizeof(kMagic) || !std::equal(std::begin(kMagic), std::end(kMagic), data.begin())) {
    return;  // fresh or unreadable header: start empty
  }

  std::map<std::uint16_t, std::size_t> index;  // seq -> position in live_
  std::optional<std::uint16_t> mark;
  std::size_t pos = sizeof(kMagic);
  const std::span<const std::uint8_t> all(data);
  while (pos + 2 <= data.size()) {
    const auto len = static_cast<std::size_t>(get_be(all, pos, 2));
    if (len < kBodyHeader || pos + 2 + len + 4 > data.size()) break;
    const auto body = all.subspan(pos + 2, len);
    if (crc_of(body) != get_be(all, pos + 2 + len, 4)) break;
    pos += 2 + len + 4;

    const auto seq = static_cast<std::uint16_t>(get_be(body, 0, 2));
    const auto state = body[2];
    const auto attempts = static_cast<std::uint32_t>(get_be(body, 3, 4));
    if (state == kSeqMark) {
      mark = seq;
      continue;
    }
    auto it = index.find(seq);
    switch (static_cast<EntryState>(state)) {
      case EntryState::kPending:
        if (it == index.end()) {
          QueueEntry e;
          e.seq = seq;
          e.payload.assign(body.begin() + kBodyHeader, body.end());
          e.attempts = attempts;
          index[seq] = live_.size();
          live_.push_back(std::move(e));
          mark = static_cast<std::uint16_t>(seq + 1);
        }
        break;
      case EntryState::kInFlight:
        if (it != index.end()) live_[it->second].attempts = attempts;
        break;
      case EntryState::kConfirmed:
      case EntryState::kParked:
        if (it != index.end()) {
          live_[it->second].state = static_cast<EntryState>(state);
          index.erase(it);
        }
        break;
      default:
        break;
    }
  }
  std::erase_if(live_, [](const QueueEntry& e) { return e.state != EntryState::kPending; });
  // A crash mid-flight resumes as pending.
  for (auto& e : live_) e.state = EntryState::kPending;
  if (mark) next_seq_ = *mark;
}

void UplinkQueue::compact() {
  auto tmp = *path_;
  tmp += ".compact";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError(fmt::format("cannot write queue log {}", tmp.string()));
    out.write(kMagic, sizeof(kMagic));
    auto write = [&](const Bytes& rec) { out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size())); };
    write(make_record(next_seq_, kSeqMark, 0, {}));
    for (const auto& e : live_) write(make_record(e.seq, static_cast<std::uint8_t>(EntryState::kPending), e.attempts, e.payload));
    out.flush();
    if (!out) throw StorageError(fmt::format("cannot write queue log {}", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, *path_, ec);
  if (ec) throw StorageError(fmt::format("cannot replace queue log {}: {}", path_->string(), ec.message()));
  file_ = std::fopen(path_->c_str(), "ab");
  if (file_ == nullptr) throw StorageError(fmt::format("cannot open queue log {}", path_->string()));
}

void UplinkQueue::append_record(std::uint16_t seq, EntryState state, std::uint32_t attempts,
                                std::span<const std::uint8_t> payload) {
  if (file_ == nullptr) return;
  const Bytes rec = make_record(seq, static_cast<std::uint8_t>(state), attempts, payload);
  if (std::fwrite(rec.data(), 1, rec.size(), file_) != rec.size() || std::fflush(file_) != 0) {
    throw StorageError(fmt::format("queue log write failed for seq {}", seq));
  }
}

std::uint16_t UplinkQueue::enqueue(Bytes payload, Millis now) {
  if (payload.size() > kMaxPayload) {
    throw RangeError("payload", fmt::format("payload of {} bytes exceeds {}", payload.size(), kMaxPayload));
  }
  const std::uint16_t seq = next_seq_;
  append_record(seq, EntryState::kPending, 0, payload);
  QueueEntry e;
  e.seq = seq;
  e.payload = std::move(payload);
  e.enqueued_ts = now;
  e.next_attempt_at = now;
  live_.push_back(std::move(e));
  next_seq_ = static_cast<std::uint16_t>(seq + 1);
  ++metrics_.enqueued;
  return seq;
}

void UplinkQueue::remove_head(EntryState final_state, Millis now, std::vector<TxEvent>& events) {
  QueueEntry head = std::move(live_.front());
  live_.pop_front();
  append_record(head.seq, final_state, head.attempts, {});
  TxEvent ev;
  ev.seq = head.seq;
  ev.ts = now;
  ev.attempt = head.attempts;
  if (final_state == EntryState::kConfirmed) {
    ev.kind = TxEvent::Kind::kConfirmed;
    ev.downlink = std::move(head.downlink);
    ++metrics_.confirmed;
    recently_confirmed_.push_back(head.seq);
    if (recently_confirmed_.size() > 64) recently_confirmed_.erase(recently_confirmed_.begin());
  } else {
    ev.kind = TxEvent::Kind::kParked;
    head.state = EntryState::kParked;
    ++metrics_.parked;
    undelivered_flag_ = true;
    parked_.push_back(std::move(head));
  }
  events.push_back(std::move(ev));
}

std::vector<TxEvent> UplinkQueue::pump(LossyLink& link, Millis now) {
  std::vector<TxEvent> events;
  while (!live_.empty()) {
    QueueEntry& head = live_.front();
    if (head.state == EntryState::kInFlight) {
      if (head.confirm_at && *head.confirm_at <= now) {
        remove_head(EntryState::kConfirmed, now, events);
        continue;
      }
      if (now < head.timeout_at) break;
      events.push_back({TxEvent::Kind::kTimeout, head.seq, head.timeout_at, head.attempts, std::nullopt});
      if (policy_.max_attempts && head.attempts >= *policy_.max_attempts) {
        remove_head(EntryState::kParked, now, events);
        continue;
      }
      head.state = EntryState::kPending;
      head.next_attempt_at = head.timeout_at + policy_.backoff_after(head.attempts);
    }

    gap_ms_ = link.model().duty_cycle_gap_ms;
    const Millis gap_ok = last_tx_ ? *last_tx_ + gap_ms_ : now;
    if (now < head.next_attempt_at || now < gap_ok) break;

    ++head.attempts;
    ++metrics_.transmissions;
    append_record(head.seq, EntryState::kInFlight, head.attempts, {});
    TxOutcome outcome = link.transmit(head.payload, now);
    last_tx_ = now;
    head.state = EntryState::kInFlight;
    head.timeout_at = now + policy_.confirm_timeout_ms;
    head.confirm_at.reset();
    if (outcome.confirmed && outcome.confirm_at <= head.timeout_at) {
      head.confirm_at = outcome.confirm_at;
      head.downlink = std::move(outcome.downlink);
    }
    events.push_back({TxEvent::Kind::kTransmit, head.seq, now, head.attempts, std::nullopt});
  }
  return events;
}

void UplinkQueue::confirm(std::uint16_t seq, Millis now) {
  if (!live_.empty() && live_.front().seq == seq && live_.front().state == EntryState::kInFlight) {
    std::vector<TxEvent> ignored;
    remove_head(EntryState::kConfirmed, now, ignored);
    return;
  }
  if (std::find(recently_confirmed_.begin(), recently_confirmed_.end(), seq) != recently_confirmed_.end()) {
    ++metrics_.duplicate_confirms;
  } else {
    ++metrics_.unknown_confirms;
  }
}

std::optional<Millis> UplinkQueue::next_wakeup() const {
  if (live_.empty()) return std::nullopt;
  const auto& head = live_.front();
  if (head.state == EntryState::kInFlight) {
    return head.confirm_at ? std::min(*head.confirm_at, head.timeout_at) : head.timeout_at;
  }
  return last_tx_ ? std::max(head.next_attempt_at, *last_tx_ + gap_ms_) : head.next_attempt_at;
}

bool UplinkQueue::take_undelivered_flag() { return std::exchange(undelivered_flag_, false); }

}  // namespace feeder::uplinkqueue
