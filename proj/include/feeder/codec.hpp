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

// Bitwise uplink/downlink payloads. The layout table in docs/wire_format.md
// is normative; field widths here must match it bit for bit.
//
// Every payload starts with one byte: message type in the high nibble and
// codec version (1) in the low nibble. Fields follow MSB first with no
// alignment, and the last byte is zero padded. Payloads never exceed 51
// bytes.

#ifndef FEEDER_CODEC_HPP
#define FEEDER_CODEC_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "feeder/hex.hpp"
#include "feeder/types.hpp"

namespace feeder::codec {

inline constexpr std::size_t kMaxPayloadBytes = 51;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kMaxTrapOps = 7;

enum class MessageType : std::uint8_t {
  kSystemUpdate = 0x1,
  kAnimalUpdate = 0x2,
  kDbSyncRequest = 0x3,
  kTrapEvent = 0x4,
  kTrapUpdate = 0x8,
};

/// SystemUpdate error_flags bits. Bits 6..15 are reserved; stations send
/// them as zero and the codec passes them through.
enum ErrorFlag : std::uint16_t {
  kErrScaleFault = 1u << 0,
  kErrRfidFault = 1u << 1,
  kErrDoorFault = 1u << 2,
  kErrHumidityIngress = 1u << 3,
  kErrUplinkUndelivered = 1u << 4,
  kErrQueueStorage = 1u << 5,
};
inline constexpr std::uint16_t kErrDefinedMask = 0x003f;

/// Temperatures travel as 0.1 degC steps offset by -40 degC in 12 bits.
std::uint16_t temperature_units(double celsius);
double celsius(std::uint16_t units);
/// Relative humidity travels as 0.1 % steps, 0..1000.
std::uint16_t humidity_units(double percent);
double percent(std::uint16_t units);
/// Weights travel as 0.1 g steps. Negative values clamp to zero; values past
/// the field are passed through so encode() can reject them.
std::uint32_t weight_units(double grams);
/// Standard deviation in 0.1 g steps, saturating at 1023.
std::uint16_t std_units(double grams);

struct SystemUpdate {
  std::uint16_t seq = 0;
  Seconds ts = 0;
  std::uint16_t temp_in = 0;   // 12 bits
  std::uint16_t temp_out = 0;  // 12 bits
  std::uint16_t rh_in = 0;     // 0..1000
  std::uint16_t rh_out = 0;    // 0..1000
  std::uint16_t error_flags = 0;

  friend bool operator==(const SystemUpdate&, const SystemUpdate&) = default;
};

struct AnimalUpdate {
  std::uint16_t seq = 0;
  std::optional<TagId> tag;
  Seconds entry_ts = 0;
  Seconds exit_ts = 0;
  std::uint32_t weight = 0;  // 0.1 g, 16 bits
  std::uint16_t std = 0;     // 0.1 g, 10 bits

  friend bool operator==(const AnimalUpdate&, const AnimalUpdate&) = default;
};

struct DbSyncRequest {
  std::uint16_t seq = 0;
  Seconds last_updated = 0;

  friend bool operator==(const DbSyncRequest&, const DbSyncRequest&) = default;
};

struct TrapEvent {
  std::uint16_t seq = 0;
  Seconds ts = 0;
  std::optional<TagId> tag;

  friend bool operator==(const TrapEvent&, const TrapEvent&) = default;
};

enum class TagOpKind : std::uint8_t { kAdd = 0, kRemove = 1 };

struct TagOp {
  TagOpKind kind = TagOpKind::kAdd;
  TagId tag;

  friend bool operator==(const TagOp&, const TagOp&) = default;
};

struct TrapUpdate {
  Seconds server_time = 0;
  std::optional<bool> master;  // absent: leave the station's flag alone
  bool more_follows = false;
  std::uint8_t part = 0;       // 4 bits, position in a chained sequence
  std::vector<TagOp> ops;      // at most kMaxTrapOps

  friend bool operator==(const TrapUpdate&, const TrapUpdate&) = default;
};

using Message = std::variant<SystemUpdate, AnimalUpdate, DbSyncRequest, TrapEvent, TrapUpdate>;

MessageType type_of(const Message& msg);
std::string_view to_string(MessageType type);

class DecodeError : public std::runtime_error {
 public:
  enum class Kind { kUnknownType, kTruncation, kVersion, kFormat, kRange };
  DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(DecodeError::Kind kind);

/// Throws feeder::RangeError naming the offending field.
Bytes encode(const Message& msg);

/// Throws DecodeError. decode(encode(m)) == m for every encodable m, and
/// encode(decode(p)) == p for every payload that decodes.
Message decode(std::span<const std::uint8_t> payload);

/// Equals encode(msg).size() without allocating.
std::size_t payload_size(const Message& msg);

/// Sequence number of an uplink; nullopt for downlinks.
std::optional<std::uint16_t> seq_of(const Message& msg);

/// One-line human form for logs, e.g. `AnimalUpdate seq=3 tag=756_...`.
std::string describe(const Message& msg);

}  // namespace feeder::codec

#endif  // FEEDER_CODEC_HPP
