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

#ifndef FEEDER_LINK_HPP
#define FEEDER_LINK_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

#include "feeder/hex.hpp"
#include "feeder/types.hpp"

namespace feeder::uplinkqueue {

/// Abstract confirmed-uplink radio link. Drops are independent per uplink
/// and per confirmation; a downlink rides with the confirmation and is lost
/// with it.
struct LinkModel {
  double uplink_drop = 0.0;
  double confirm_drop = 0.0;
  Millis latency_ms = 0;  // one way
  Millis duty_cycle_gap_ms = 0;

  static LinkModel symmetric(double drop, Millis latency_ms = 0, Millis gap_ms = 0) {
    return {drop, drop, latency_ms, gap_ms};
  }
  /// Throws std::invalid_argument on probabilities outside [0, 1] or
  /// negative times.
  void validate() const;
};

/// What the far end did with an uplink that got through.
struct Reception {
  bool ack = true;
  std::optional<Bytes> downlink;
};

using Receiver = std::function<Reception(const Bytes& payload, Millis arrival)>;

struct TxOutcome {
  bool uplink_delivered = false;
  bool confirmed = false;
  Millis confirm_at = 0;  // valid when confirmed
  std::optional<Bytes> downlink;
};

struct LinkStats {
  std::uint64_t transmissions = 0;
  std::uint64_t uplinks_delivered = 0;
  std::uint64_t confirmations_delivered = 0;
};

class LossyLink {
 public:
  LossyLink(LinkModel model, std::uint64_t seed, Receiver receiver);

  TxOutcome transmit(const Bytes& payload, Millis now);

  const LinkModel& model() const { return model_; }
  const LinkStats& stats() const { return stats_; }
  /// Simulates the radio module going away (every uplink is lost).
  void set_down(bool down) { down_ = down; }

 private:
  LinkModel model_;
  std::mt19937_64 rng_;
  Receiver receiver_;
  LinkStats stats_;
  bool down_ = false;
};

}  // namespace feeder::uplinkqueue

#endif  // FEEDER_LINK_HPP
