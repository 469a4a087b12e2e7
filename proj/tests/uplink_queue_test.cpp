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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include <gtest/gtest.h>

#include "feeder/uplink_queue.hpp"

namespace feeder::uplinkqueue {
namespace {

Reception ack_all(const Bytes&, Millis) { return {}; }

Bytes payload_of(std::uint32_t i) {
  return {static_cast<std::uint8_t>(i >> 8), static_cast<std::uint8_t>(i), 0x5a};
}

/// Pumps until the queue is empty or `until` passes.
std::vector<TxEvent> drive(UplinkQueue& q, LossyLink& link, Millis until) {
  std::vector<TxEvent> all;
  while (auto t = q.next_wakeup()) {
    if (*t > until) break;
    auto ev = q.pump(link, *t);
    all.insert(all.end(), ev.begin(), ev.end());
  }
  return all;
}

std::vector<std::uint16_t> live_seqs(const UplinkQueue& q) {
  std::vector<std::uint16_t> out;
  for (const auto& e : q.entries()) out.push_back(e.seq);
  return out;
}

TEST(RetryPolicy, BackoffDoublesToCap) {
  RetryPolicy p;
  EXPECT_EQ(p.backoff_after(1), 5000);
  EXPECT_EQ(p.backoff_after(2), 10000);
  EXPECT_EQ(p.backoff_after(4), 40000);
  EXPECT_EQ(p.backoff_after(5), 80000);
  EXPECT_EQ(p.backoff_after(50), 80000);
}

TEST(UplinkQueue, FifoDelivery) {
  UplinkQueue q;
  std::vector<Bytes> received;
  LossyLink link(LinkModel{}, 1, [&](const Bytes& p, Millis) {
    received.push_back(p);
    return Reception{};
  });
  for (std::uint32_t i = 0; i < 1000; ++i) EXPECT_EQ(q.enqueue(payload_of(i), 0), i);
  drive(q, link, 1'000'000);
  ASSERT_EQ(received.size(), 1000u);
  for (std::uint32_t i = 0; i < 1000; ++i) EXPECT_EQ(received[i], payload_of(i));
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(q.metrics().confirmed, 1000u);
}

TEST(UplinkQueue, OversizeRejected) {
  UplinkQueue q;
  EXPECT_THROW(q.enqueue(Bytes(kMaxPayload + 1), 0), RangeError);
  EXPECT_NO_THROW(q.enqueue(Bytes(kMaxPayload), 0));
  EXPECT_EQ(q.size(), 1u);
}

TEST(UplinkQueue, ExplicitConfirms) {
  UplinkQueue q;
  // The link never confirms on its own; acks arrive through confirm().
  LossyLink link(LinkModel{0.0, 1.0, 0, 0}, 1, ack_all);
  q.enqueue(payload_of(1), 0);
  q.enqueue(payload_of(2), 0);
  q.pump(link, 0);
  q.confirm(1, 10);  // not the head
  EXPECT_EQ(q.metrics().unknown_confirms, 1u);
  q.confirm(0, 10);
  EXPECT_EQ(live_seqs(q), std::vector<std::uint16_t>{1});
  q.confirm(0, 20);
  EXPECT_EQ(q.metrics().duplicate_confirms, 1u);
  q.confirm(999, 20);
  EXPECT_EQ(q.metrics().unknown_confirms, 2u);
}

TEST(UplinkQueue, TimeoutThenBackoff) {
  UplinkQueue q;
  LossyLink link(LinkModel{1.0, 0.0, 0, 0}, 1, ack_all);
  q.enqueue(payload_of(0), 0);
  const auto ev = drive(q, link, 60'000);
  std::vector<Millis> tx;
  for (const auto& e : ev) {
    if (e.kind == TxEvent::Kind::kTransmit) tx.push_back(e.ts);
  }
  // Transmit, 5 s timeout, then 5, 10, 20 s backoff.
  ASSERT_GE(tx.size(), 4u);
  EXPECT_EQ(tx[0], 0);
  EXPECT_EQ(tx[1], 10'000);
  EXPECT_EQ(tx[2], 25'000);
  EXPECT_EQ(tx[3], 50'000);
}

TEST(UplinkQueue, BoundedAttemptsPark) {
  RetryPolicy p;
  p.max_attempts = 2;
  UplinkQueue q(p);
  LossyLink link(LinkModel{1.0, 0.0, 0, 0}, 1, ack_all);
  q.enqueue(payload_of(0), 0);
  q.enqueue(payload_of(1), 0);
  drive(q, link, 10'000'000);
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(q.parked().size(), 2u);
  EXPECT_EQ(q.metrics().transmissions, 4u);
  EXPECT_TRUE(q.take_undelivered_flag());
  EXPECT_FALSE(q.take_undelivered_flag());
}

TEST(UplinkQueue, DutyCycleGapRespected) {
  UplinkQueue q;
  LossyLink link(LinkModel{0.2, 0.2, 300, 7000}, 4, ack_all);
  for (std::uint32_t i = 0; i < 200; ++i) q.enqueue(payload_of(i), 0);
  const auto ev = drive(q, link, 100'000'000);
  EXPECT_TRUE(q.empty());
  std::optional<Millis> last;
  for (const auto& e : ev) {
    if (e.kind != TxEvent::Kind::kTransmit) continue;
    if (last) EXPECT_GE(e.ts - *last, 7000);
    last = e.ts;
  }
}

TEST(UplinkQueue, UnboundedMeanAttempts) {
  UplinkQueue q;
  LossyLink link(LinkModel{0.3, 0.0, 0, 0}, 21, ack_all);
  for (std::uint32_t i = 0; i < 1995; ++i) q.enqueue(payload_of(i), 0);
  drive(q, link, std::numeric_limits<Millis>::max());
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(q.metrics().confirmed, 1995u);
  const double mean = static_cast<double>(q.metrics().transmissions) / 1995.0;
  EXPECT_NEAR(mean, 1.0 / 0.7, 0.05 / 0.7);
}

TEST(UplinkQueue, TwoAttemptDeliveryRate) {
  RetryPolicy p;
  p.max_attempts = 2;
  UplinkQueue q(p);
  LossyLink link(LinkModel{0.3, 0.0, 0, 0}, 22, ack_all);
  const std::uint32_t n = 100'000;
  for (std::uint32_t i = 0; i < n; ++i) q.enqueue(payload_of(i), 0);
  drive(q, link, std::numeric_limits<Millis>::max());
  EXPECT_NEAR(static_cast<double>(q.metrics().confirmed) / n, 0.91, 0.01);
  EXPECT_EQ(q.metrics().confirmed + q.metrics().parked, n);
}

class QueueLog : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("uplink_queue_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  static Bytes read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  static void write(const std::filesystem::path& p, std::span<const std::uint8_t> b) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  }

  std::filesystem::path dir_;
};

TEST_F(QueueLog, SurvivesReopen) {
  const auto path = dir_ / "q.log";
  {
    UplinkQueue q({}, path);
    for (std::uint32_t i = 0; i < 5; ++i) q.enqueue(payload_of(i), 0);
    LossyLink link(LinkModel{0.0, 1.0, 0, 0}, 1, ack_all);
    q.pump(link, 0);
    q.confirm(0, 1);
    q.pump(link, 1);  // seq 1 in flight when the process dies
  }
  UplinkQueue q({}, path);
  EXPECT_EQ(live_seqs(q), (std::vector<std::uint16_t>{1, 2, 3, 4}));
  EXPECT_EQ(q.entries().front().payload, payload_of(1));
  EXPECT_EQ(q.next_seq(), 5);
}

TEST_F(QueueLog, SeqNotReusedAfterDrain) {
  const auto path = dir_ / "q.log";
  {
    UplinkQueue q({}, path);
    LossyLink link(LinkModel{}, 1, ack_all);
    for (std::uint32_t i = 0; i < 3; ++i) q.enqueue(payload_of(i), 0);
    drive(q, link, 1'000'000);
    EXPECT_TRUE(q.empty());
  }
  UplinkQueue q({}, path);
  EXPECT_TRUE(q.empty());
  EXPECT_EQ(q.next_seq(), 3);
}

// Crash at any byte of any write: recovery yields the state before or after
// that operation, never something else.
TEST_F(QueueLog, CrashAtEveryByte) {
  const auto path = dir_ / "q.log";
  struct State {
    std::vector<std::uint16_t> seqs;
    std::uint16_t next_seq;
    Bytes file;
  };
  std::vector<State> states;
  {
    UplinkQueue q({}, path);
    // Confirmations only arrive through confirm(), so every operation below
    // appends at most one record.
    LossyLink link(LinkModel{0.3, 1.0, 0, 0}, 9, ack_all);
    std::mt19937_64 rng(9);
    auto snap = [&] { states.push_back({live_seqs(q), q.next_seq(), read(path)}); };
    snap();
    Millis t = 0;
    for (int op = 0; op < 80; ++op) {
      const auto r = rng() % 3;
      if (r == 0) {
        q.enqueue(payload_of(static_cast<std::uint32_t>(op)), t);
      } else if (r == 1 && !q.empty() && q.entries().front().state == EntryState::kInFlight) {
        q.confirm(q.entries().front().seq, t);
      } else if (auto w = q.next_wakeup()) {
        t = std::max(t, *w);
        q.pump(link, t);
      }
      snap();
    }
  }
  ASSERT_GT(states.size(), 2u);
  const auto trial = dir_ / "trial.log";
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    const auto& before = states[k];
    const auto& after = states[k + 1];
    ASSERT_TRUE(std::equal(before.file.begin(), before.file.end(), after.file.begin())) << "log is append-only";
    for (std::size_t cut = before.file.size(); cut <= after.file.size(); ++cut) {
      write(trial, std::span(after.file).first(cut));
      UplinkQueue q({}, trial);
      const auto got = live_seqs(q);
      const bool is_before = got == before.seqs && q.next_seq() == before.next_seq;
      const bool is_after = got == after.seqs && q.next_seq() == after.next_seq;
      EXPECT_TRUE(is_before || is_after) << "op " << k << " cut " << cut;
    }
  }
}

TEST_F(QueueLog, TrailingGarbageIgnored) {
  const auto path = dir_ / "q.log";
  {
    UplinkQueue q({}, path);
    for (std::uint32_t i = 0; i < 4; ++i) q.enqueue(payload_of(i), 0);
  }
  auto bytes = read(path);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) bytes.push_back(static_cast<std::uint8_t>(rng()));
  write(path, bytes);
  UplinkQueue q({}, path);
  EXPECT_EQ(live_seqs(q), (std::vector<std::uint16_t>{0, 1, 2, 3}));
  // Compaction dropped the garbage, so new records are reachable.
  q.enqueue(payload_of(4), 0);
  UplinkQueue again({}, path);
  EXPECT_EQ(again.size(), 5u);
}

TEST_F(QueueLog, UnwritableLogThrowsStorageError) {
  EXPECT_THROW(UplinkQueue({}, dir_ / "missing" / "q.log"), StorageError);
}

}  // namespace
}  // namespace feeder::uplinkqueue
