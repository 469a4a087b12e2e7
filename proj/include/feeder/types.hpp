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

#ifndef FEEDER_TYPES_HPP
#define FEEDER_TYPES_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace feeder {

/// Milliseconds on the station (or simulation) clock.
using Millis = std::int64_t;

/// Whole seconds since the Unix epoch, as carried on the wire.
using Seconds = std::uint32_t;

using StationId = std::uint16_t;

inline constexpr Seconds to_seconds(Millis ms) {
  return static_cast<Seconds>(ms < 0 ? 0 : ms / 1000);
}

class RangeError : public std::out_of_range {
 public:
  RangeError(std::string field, const std::string& what)
      : std::out_of_range(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// FDX-B animal identity: 10-bit country code and 38-bit national id.
class TagId {
 public:
  static constexpr std::uint16_t kMaxCountry = (1u << 10) - 1;
  static constexpr std::uint64_t kMaxNational = (std::uint64_t{1} << 38) - 1;

  constexpr TagId() = default;
  /// Throws RangeError when either field exceeds its bit width.
  TagId(std::uint16_t country, std::uint64_t national);

  constexpr std::uint16_t country() const { return country_; }
  constexpr std::uint64_t national() const { return national_; }

  /// 48-bit packed form: country in the top 10 bits, national id below.
  constexpr std::uint64_t packed() const {
    return (std::uint64_t{country_} << 38) | national_;
  }
  static TagId from_packed(std::uint64_t bits);

  /// Canonical display form `CCC_NNNNNNNNNNNN` (zero padded, decimal).
  std::string str() const;
  /// Accepts the canonical form; throws RangeError / std::invalid_argument.
  static TagId parse(std::string_view text);

  friend constexpr auto operator<=>(const TagId&, const TagId&) = default;

 private:
  std::uint16_t country_ = 0;
  std::uint64_t national_ = 0;
};

struct RfidDetection {
  TagId tag;
  Millis ts = 0;
  StationId station_id = 0;

  friend bool operator==(const RfidDetection&, const RfidDetection&) = default;
};

/// Bit set describing how trustworthy an attributed visit weight is.
enum VisitQuality : std::uint8_t {
  kQualityOk = 0,
  kQualityUnresolved = 1 << 0,  // no exit shift matched the entrance within tolerance
  kQualityLowQuality = 1 << 1,  // a flanking period had no stability window
  kQualityAmbiguousTag = 1 << 2,
};

struct AnimalVisit {
  std::optional<TagId> tag;
  Millis entry_ts = 0;
  Millis exit_ts = 0;
  double weight_grams = 0.0;
  double quality_std_grams = 0.0;
  StationId station_id = 0;
  std::uint8_t quality = kQualityOk;
};

}  // namespace feeder

#endif  // FEEDER_TYPES_HPP
