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

#include "feeder/codec.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "feeder/bitio.hpp"

namespace feeder::codec {

namespace {

constexpr unsigned kSeqBits = 16;
constexpr unsigned kTimeBits = 32;
constexpr unsigned kTempBits = 12;
constexpr unsigned kRhBits = 10;
constexpr unsigned kFlagsBits = 16;
constexpr unsigned kCountryBits = 10;
constexpr unsigned kNationalBits = 38;
constexpr unsigned kTagBits = kCountryBits + kNationalBits;
constexpr unsigned kWeightBits = 16;
constexpr unsigned kStdBits = 10;
constexpr unsigned kOpCountBits = 4;
constexpr unsigned kPartBits = 4;

constexpr std::uint16_t kMaxRh = 1000;

std::size_t body_bits(const Message& msg) {
  struct Visitor {
    std::size_t operator()(const SystemUpdate&) const {
      return kSeqBits + kTimeBits + 2 * kTempBits + 2 * kRhBits + kFlagsBits;
    }
    std::size_t operator()(const AnimalUpdate&) const {
      return kSeqBits + 1 + kTagBits + 2 * kTimeBits + kWeightBits + kStdBits;
    }
    std::size_t operator()(const DbSyncRequest&) const { return kSeqBits + kTimeBits; }
    std::size_t operator()(const TrapEvent&) const { return kSeqBits + kTimeBits + 1 + kTagBits; }
    std::size_t operator()(const TrapUpdate& m) const {
      return kTimeBits + 3 + kOpCountBits + kPartBits + m.ops.size() * (1 + kTagBits);
    }
  };
  return std::visit(Visitor{}, msg);
}

void check(bool ok, const char* field, const std::string& detail) {
  if (!ok) throw RangeError(field, fmt::format("field '{}' out of range: {}", field, detail));
}

void put_tag(BitWriter& w, const std::optional<TagId>& tag) {
  w.put_bit(tag.has_value());
  w.put(tag ? tag->country() : 0, kCountryBits);
  w.put(tag ? tag->national() : 0, kNationalBits);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> payload) : bits_(payload.subspan(1)) {}

  std::uint64_t get(unsigned width) {
    auto v = bits_.get(width);
    if (!v) throw DecodeError(DecodeError::Kind::kTruncation, "payload truncated");
    return *v;
  }
  bool bit() { return get(1) != 0; }

  std::optional<TagId> tag(const char* field) {
    const bool present = bit();
    const auto country = static_cast<std::uint16_t>(get(kCountryBits));
    const auto national = get(kNationalBits);
    if (!present) {
      if (country != 0 || national != 0) {
        throw DecodeError(DecodeError::Kind::kFormat, fmt::format("{}: absent tag carries nonzero bits", field));
      }
      return std::nullopt;
    }
    return TagId(country, national);
  }

  void finish() {
    const std::size_t rest = bits_.remaining();
    if (rest >= 8) throw DecodeError(DecodeError::Kind::kFormat, "trailing bytes after payload");
    if (bits_.get(static_cast<unsigned>(rest)).value_or(1) != 0) {
      throw DecodeError(DecodeError::Kind::kFormat, "nonzero padding bits");
    }
  }

 private:
  BitReader bits_;
};

}  // namespace

std::uint16_t temperature_units(double celsius) {
  const double units = std::round((celsius + 40.0) * 10.0);
  return static_cast<std::uint16_t>(std::clamp(units, 0.0, 4095.0));
}

double celsius(std::uint16_t units) { return units / 10.0 - 40.0; }

std::uint16_t humidity_units(double pct) {
  return static_cast<std::uint16_t>(std::clamp(std::round(pct * 10.0), 0.0, double{kMaxRh}));
}

double percent(std::uint16_t units) { return units / 10.0; }

std::uint32_t weight_units(double grams) {
  const double units = std::round(grams * 10.0);
  if (!(units > 0.0)) return 0;
  return static_cast<std::uint32_t>(std::min(units, 4294967295.0));
}

std::uint16_t std_units(double grams) {
  const double units = std::round(grams * 10.0);
  if (!(units > 0.0)) return 0;
  return static_cast<std::uint16_t>(std::min(units, 1023.0));
}

MessageType type_of(const Message& msg) {
  struct Visitor {
    MessageType operator()(const SystemUpdate&) const { return MessageType::kSystemUpdate; }
    MessageType operator()(const AnimalUpdate&) const { return MessageType::kAnimalUpdate; }
    MessageType operator()(const DbSyncRequest&) const { return MessageType::kDbSyncRequest; }
    MessageType operator()(const TrapEvent&) const { return MessageType::kTrapEvent; }
    MessageType operator()(const TrapUpdate&) const { return MessageType::kTrapUpdate; }
  };
  return std::visit(Visitor{}, msg);
}

std::string_view to_string(MessageType type) {
  switch (type) {
    case MessageType::kSystemUpdate: return "SystemUpdate";
    case MessageType::kAnimalUpdate: return "AnimalUpdate";
    case MessageType::kDbSyncRequest: return "DbSyncRequest";
    case MessageType::kTrapEvent: return "TrapEvent";
    case MessageType::kTrapUpdate: return "TrapUpdate";
  }
  return "?";
}

std::string_view to_string(DecodeError::Kind kind) {
  switch (kind) {
    case DecodeError::Kind::kUnknownType: return "UnknownType";
    case DecodeError::Kind::kTruncation: return "TruncationError";
    case DecodeError::Kind::kVersion: return "VersionError";
    case DecodeError::Kind::kFormat: return "FormatError";
    case DecodeError::Kind::kRange: return "RangeError";
  }
  return "?";
}

std::size_t payload_size(const Message& msg) { return (8 + body_bits(msg) + 7) / 8; }

std::optional<std::uint16_t> seq_of(const Message& msg) {
  return std::visit(
      [](const auto& m) -> std::optional<std::uint16_t> {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, TrapUpdate>) {
          return std::nullopt;
        } else {
          return m.seq;
        }
      },
      msg);
}

Bytes encode(const Message& msg) {
  BitWriter w;
  w.put(static_cast<std::uint8_t>(type_of(msg)), 4);
  w.put(kVersion, 4);

  struct Visitor {
    BitWriter& w;
    void operator()(const SystemUpdate& m) const {
      check(m.temp_in < (1u << kTempBits), "temp_in", std::to_string(m.temp_in));
      check(m.temp_out < (1u << kTempBits), "temp_out", std::to_string(m.temp_out));
      check(m.rh_in <= kMaxRh, "rh_in", std::to_string(m.rh_in));
      check(m.rh_out <= kMaxRh, "rh_out", std::to_string(m.rh_out));
      w.put(m.seq, kSeqBits);
      w.put(m.ts, kTimeBits);
      w.put(m.temp_in, kTempBits);
      w.put(m.temp_out, kTempBits);
      w.put(m.rh_in, kRhBits);
      w.put(m.rh_out, kRhBits);
      w.put(m.error_flags, kFlagsBits);
    }
    void operator()(const AnimalUpdate& m) const {
      check(m.weight < (1u << kWeightBits), "weight", fmt::format("{:.1f} g", m.weight / 10.0));
      check(m.std < (1u << kStdBits), "std", fmt::format("{:.1f} g", m.std / 10.0));
      w.put(m.seq, kSeqBits);
      put_tag(w, m.tag);
      w.put(m.entry_ts, kTimeBits);
      w.put(m.exit_ts, kTimeBits);
      w.put(m.weight, kWeightBits);
      w.put(m.std, kStdBits);
    }
    void operator()(const DbSyncRequest& m) const {
      w.put(m.seq, kSeqBits);
      w.put(m.last_updated, kTimeBits);
    }
    void operator()(const TrapEvent& m) const {
      w.put(m.seq, kSeqBits);
      w.put(m.ts, kTimeBits);
      put_tag(w, m.tag);
    }
    void operator()(const TrapUpdate& m) const {
      check(m.ops.size() <= kMaxTrapOps, "ops",
            fmt::format("{} ops exceed {} per downlink; split into a chained sequence", m.ops.size(), kMaxTrapOps));
      check(m.part < (1u << kPartBits), "part", std::to_string(m.part));
      w.put(m.server_time, kTimeBits);
      w.put_bit(m.master.has_value());
      w.put_bit(m.master.value_or(false));
      w.put_bit(m.more_follows);
      w.put(m.ops.size(), kOpCountBits);
      w.put(m.part, kPartBits);
      for (const auto& op : m.ops) {
        w.put_bit(op.kind == TagOpKind::kRemove);
        w.put(op.tag.country(), kCountryBits);
        w.put(op.tag.national(), kNationalBits);
      }
    }
  };
  std::visit(Visitor{w}, msg);
  auto bytes = std::move(w).finish();
  return bytes;
}

Message decode(std::span<const std::uint8_t> payload) {
  using Kind = DecodeError::Kind;
  if (payload.empty()) throw DecodeError(Kind::kTruncation, "empty payload");
  const unsigned type = payload[0] >> 4;
  const unsigned version = payload[0] & 0xf;
  switch (static_cast<MessageType>(type)) {
    case MessageType::kSystemUpdate:
    case MessageType::kAnimalUpdate:
    case MessageType::kDbSyncRequest:
    case MessageType::kTrapEvent:
    case MessageType::kTrapUpdate:
      break;
    default:
      throw DecodeError(Kind::kUnknownType, fmt::format("unknown message type {:#x}", type));
  }
  if (version != kVersion) throw DecodeError(Kind::kVersion, fmt::format("unsupported codec version {}", version));

  Reader r(payload);
  Message out;
  switch (static_cast<MessageType>(type)) {
    case MessageType::kSystemUpdate: {
      SystemUpdate m;
      m.seq = static_cast<std::uint16_t>(r.get(kSeqBits));
      m.ts = static_cast<Seconds>(r.get(kTimeBits));
      m.temp_in = static_cast<std::uint16_t>(r.get(kTempBits));
      m.temp_out = static_cast<std::uint16_t>(r.get(kTempBits));
      m.rh_in = static_cast<std::uint16_t>(r.get(kRhBits));
      m.rh_out = static_cast<std::uint16_t>(r.get(kRhBits));
      m.error_flags = static_cast<std::uint16_t>(r.get(kFlagsBits));
      if (m.rh_in > kMaxRh || m.rh_out > kMaxRh) throw DecodeError(Kind::kRange, "relative humidity above 100 %");
      out = m;
      break;
    }
    case MessageType::kAnimalUpdate: {
      AnimalUpdate m;
      m.seq = static_cast<std::uint16_t>(r.get(kSeqBits));
      m.tag = r.tag("tag");
      m.entry_ts = static_cast<Seconds>(r.get(kTimeBits));
      m.exit_ts = static_cast<Seconds>(r.get(kTimeBits));
      m.weight = static_cast<std::uint32_t>(r.get(kWeightBits));
      m.std = static_cast<std::uint16_t>(r.get(kStdBits));
      out = m;
      break;
    }
    case MessageType::kDbSyncRequest: {
      DbSyncRequest m;
      m.seq = static_cast<std::uint16_t>(r.get(kSeqBits));
      m.last_updated = static_cast<Seconds>(r.get(kTimeBits));
      out = m;
      break;
    }
    case MessageType::kTrapEvent: {
      TrapEvent m;
      m.seq = static_cast<std::uint16_t>(r.get(kSeqBits));
      m.ts = static_cast<Seconds>(r.get(kTimeBits));
      m.tag = r.tag("tag");
      out = m;
      break;
    }
    case MessageType::kTrapUpdate: {
      TrapUpdate m;
      m.server_time = static_cast<Seconds>(r.get(kTimeBits));
      const bool master_valid = r.bit();
      const bool master = r.bit();
      if (!master_valid && master) throw DecodeError(Kind::kFormat, "master flag set without valid bit");
      if (master_valid) m.master = master;
      m.more_follows = r.bit();
      const auto count = r.get(kOpCountBits);
      if (count > kMaxTrapOps) throw DecodeError(Kind::kRange, fmt::format("{} ops exceed {}", count, kMaxTrapOps));
      m.part = static_cast<std::uint8_t>(r.get(kPartBits));
      for (std::uint64_t i = 0; i < count; ++i) {
        TagOp op;
        op.kind = r.bit() ? TagOpKind::kRemove : TagOpKind::kAdd;
        const auto country = static_cast<std::uint16_t>(r.get(kCountryBits));
        op.tag = TagId(country, r.get(kNationalBits));
        m.ops.push_back(op);
      }
      out = m;
      break;
    }
  }
  r.finish();
  return out;
}

std::string describe(const Message& msg) {
  struct Visitor {
    std::string operator()(const SystemUpdate& m) const {
      return fmt::format("SystemUpdate seq={} ts={} temp_in={:.1f} temp_out={:.1f} rh_in={:.1f} rh_out={:.1f} flags={:#06x}",
                         m.seq, m.ts, celsius(m.temp_in), celsius(m.temp_out), percent(m.rh_in), percent(m.rh_out),
                         m.error_flags);
    }
    std::string operator()(const AnimalUpdate& m) const {
      return fmt::format("AnimalUpdate seq={} tag={} entry={} exit={} weight={:.1f} std={:.1f}", m.seq,
                         m.tag ? m.tag->str() : "untagged", m.entry_ts, m.exit_ts, m.weight / 10.0, m.std / 10.0);
    }
    std::string operator()(const DbSyncRequest& m) const {
      return fmt::format("DbSyncRequest seq={} last_updated={}", m.seq, m.last_updated);
    }
    std::string operator()(const TrapEvent& m) const {
      return fmt::format("TrapEvent seq={} ts={} tag={}", m.seq, m.ts, m.tag ? m.tag->str() : "untagged");
    }
    std::string operator()(const TrapUpdate& m) const {
      std::string ops;
      for (const auto& op : m.ops) {
        ops += fmt::format(" {}{}", op.kind == TagOpKind::kAdd ? '+' : '-', op.tag.str());
      }
      return fmt::format("TrapUpdate server_time={} master={} more={} part={} ops=[{}]", m.server_time,
                         m.master ? (*m.master ? "on" : "off") : "keep", m.more_follows, m.part,
                         ops.empty() ? "" : ops.substr(1));
    }
  };
  return std::visit(Visitor{}, msg);
}

}  // namespace feeder::codec
