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

#include "feeder/link.hpp"

#include <stdexcept>

namespace feeder::uplinkqueue {

void LinkModel::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(uplink_drop) || !prob(confirm_drop)) throw std::invalid_argument("drop probability outside [0, 1]");
  if (latency_ms < 0 || duty_cycle_gap_ms < 0) throw std::invalid_argument("negative link timing");
}

LossyLink::LossyLink(LinkModel model, std::uint64_t seed, Receiver receiver)
    : model_(model), rng_(seed), receiver_(std::move(receiver)) {
  model_.validate();
}

TxOutcome LossyLink::transmit(const Bytes& payload, Millis now) {
  ++stats_.transmissions;
  TxOutcome out;
  std::bernoulli_distribution up_lost(model_.uplink_drop);
  std::bernoulli_distribution ack_lost(model_.confirm_drop);
  const bool uplink_lost = up_lost(rng_);
  const bool confirm_lost = ack_lost(rng_);
  if (down_ || uplink_lost) return out;

  out.uplink_delivered = true;
  ++stats_.uplinks_delivered;
  const Millis arrival = now + model_.latency_ms;
  Reception rx = receiver_ ? receiver_(payload, arrival) : Reception{};
  if (!rx.ack || confirm_lost) return out;

  out.confirmed = true;
  out.confirm_at = arrival + model_.latency_ms;
  out.downlink = std::move(rx.downlink);
  ++stats_.confirmations_delivered;
  return out;
}

}  // namespace feeder::uplinkqueue
