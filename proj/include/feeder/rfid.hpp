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

// FDX-B transponder frames, simulated antenna passes and the matching of
// tag reads to weighed visits.
//
// Frame layout (128 bits, index = transmission order):
//   [0..10]    header 1 0000000000
//   13 blocks of 8 data bits (LSB first) followed by a stuffing bit `1`.
//   Data bytes, in order:
//     0..7   identification word, little endian:
//              bits 0..37 national id, 38..47 country code,
//              bit 48 data-block flag, 49..62 reserved, bit 63 animal flag
//     8..9   CRC-16 over bytes 0..7 (poly 0x1021 reflected, init 0), LSB first
//     10..12 24-bit extension block, little endian
// See docs/wire_format.md for worked vectors.

#ifndef FEEDER_RFID_HPP
#define FEEDER_RFID_HPP

#include <bitset>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feeder/types.hpp"

namespace feeder::rfid {

struct FdxbFrame {
  /// bits[i] is the i-th transmitted bit.
  std::bitset<128> bits;

  /// 32 hex characters; frame bit i is bit (7 - i % 8) of byte i / 8.
  std::string hex() const;
  static FdxbFrame from_hex(std::string_view text);

  friend bool operator==(const FdxbFrame&, const FdxbFrame&) = default;
};

struct FrameFlags {
  bool animal = true;
  bool data_block = false;

  friend bool operator==(const FrameFlags&, const FrameFlags&) = default;
};

struct DecodedFrame {
  TagId tag;
  FrameFlags flags;
  std::uint32_t extension = 0;
};

enum class FrameStatus { kOk, kHeaderError, kFramingError, kCrcError };

std::string_view to_string(FrameStatus status);

struct DecodeResult {
  FrameStatus status = FrameStatus::kOk;
  std::optional<DecodedFrame> frame;  // set iff status == kOk
};

/// Never throws; every input maps to exactly one status.
DecodeResult decode_frame(const FdxbFrame& frame);

/// Throws RangeError if the extension does not fit in 24 bits.
FdxbFrame encode_frame(const TagId& tag, FrameFlags flags = {}, std::uint32_t extension = 0);

/// CRC-16 as used in the frame (reflected 0x1021, init 0x0000).
std::uint16_t crc16(std::span<const std::uint8_t> data);

/// One antenna pass: read with probability `p_detect`, stamped with `ts`.
std::optional<RfidDetection> simulate_pass(const TagId& tag, double p_detect, Millis ts,
                                           StationId station_id, std::mt19937_64& rng);

struct MatchResult {
  std::vector<AnimalVisit> visits;
  /// Indices into the detection list that were used up by some visit.
  std::vector<std::size_t> consumed;
};

inline constexpr Millis kDefaultMatchWindowMs = 5000;

/// Assigns tags to visits from reads within `window_ms` of a visit's entry or
/// exit. Each tag goes to at most one visit of the batch and each detection is
/// consumed by at most one visit. Prefers more tagged visits, then smaller
/// total distance, then reads near the entrance. Visits with no qualifying
/// read keep an empty tag.
MatchResult match_detections(std::vector<AnimalVisit> visits,
                             std::span<const RfidDetection> detections,
                             Millis window_ms = kDefaultMatchWindowMs);

/// Single-visit convenience form.
AnimalVisit match_detections(const AnimalVisit& visit, std::span<const RfidDetection> detections,
                             Millis window_ms = kDefaultMatchWindowMs);

/// `ts_ms,country,id` export line.
std::string to_line(const RfidDetection& detection);
/// Throws std::invalid_argument on malformed input.
RfidDetection parse_detection_line(std::string_view line, StationId station_id = 0);

}  // namespace feeder::rfid

#endif  // FEEDER_RFID_HPP
