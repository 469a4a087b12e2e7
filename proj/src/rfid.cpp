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

#include "feeder/rfid.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdlib>
#include <stdexcept>

#include <fmt/format.h>

#include "feeder/hex.hpp"

namespace feeder::rfid {

namespace {

constexpr std::size_t kHeaderBits = 11;
constexpr std::size_t kDataBytes = 13;
constexpr std::size_t kBlockBits = 9;

bool header_bit(std::size_t i) { return i == 0; }

}  // namespace

std::string FdxbFrame::hex() const {
  std::array<std::uint8_t, 16> bytes{};
  for (std::size_t i = 0; i < 128; ++i) {
    if (bits[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
  }
  return to_hex(bytes);
}

FdxbFrame FdxbFrame::from_hex(std::string_view text) {
  const Bytes bytes = feeder::from_hex(text);
  if (bytes.size() != 16) throw std::invalid_argument("FDX-B frame must be 32 hex characters");
  FdxbFrame frame;
  for (std::size_t i = 0; i < 128; ++i) frame.bits[i] = (bytes[i / 8] >> (7 - i % 8)) & 1;
  return frame;
}

std::string_view to_string(FrameStatus status) {
  switch (status) {
    case FrameStatus::kOk: return "ok";
    case FrameStatus::kHeaderError: return "header_error";
    case FrameStatus::kFramingError: return "framing_error";
    case FrameStatus::kCrcError: return "crc_error";
  }
  return "?";
}

std::uint16_t crc16(std::span<const std::uint8_t> data) {
  std::uint16_t crc = 0x0000;
  for (auto byte : data) {
    crc ^= byte;
    for (int bit = 0; bit < 8; ++bit) crc = (crc & 1) ? static_cast<std::uint16_t>((crc >> 1) ^ 0x8408) : crc >> 1;
  }
  return crc;
}

FdxbFrame encode_frame(const TagId& tag, FrameFlags flags, std::uint32_t extension) {
  if (extension >> 24) throw RangeError("extension", "extension block exceeds 24 bits");
  std::uint64_t word = tag.national() | (std::uint64_t{tag.country()} << 38);
  if (flags.data_block) word |= std::uint64_t{1} << 48;
  if (flags.animal) word |= std::uint64_t{1} << 63;

  std::array<std::uint8_t, kDataBytes> data{};
  for (std::size_t i = 0; i < 8; ++i) data[i] = static_cast<std::uint8_t>(word >> (8 * i));
  const std::uint16_t crc = crc16(std::span(data).first(8));
  data[8] = static_cast<std::uint8_t>(crc);
  data[9] = static_cast<std::uint8_t>(crc >> 8);
  for (std::size_t i = 0; i < 3; ++i) data[10 + i] = static_cast<std::uint8_t>(extension >> (8 * i));

  FdxbFrame frame;
  for (std::size_t i = 0; i < kHeaderBits; ++i) frame.bits[i] = header_bit(i);
  for (std::size_t b = 0; b < kDataBytes; ++b) {
    const std::size_t base = kHeaderBits + b * kBlockBits;
    for (std::size_t k = 0; k < 8; ++k) frame.bits[base + k] = (data[b] >> k) & 1;
    frame.bits[base + 8] = true;
  }
  return frame;
}

DecodeResult decode_frame(const FdxbFrame& frame) {
  for (std::size_t i = 0; i < kHeaderBits; ++i) {
    if (frame.bits[i] != header_bit(i)) return {FrameStatus::kHeaderError, std::nullopt};
  }
  std::array<std::uint8_t, kDataBytes> data{};
  for (std::size_t b = 0; b < kDataBytes; ++b) {
    const std::size_t base = kHeaderBits + b * kBlockBits;
    if (!frame.bits[base + 8]) return {FrameStatus::kFramingError, std::nullopt};
    for (std::size_t k = 0; k < 8; ++k) {
      if (frame.bits[base + k]) data[b] |= static_cast<std::uint8_t>(1u << k);
    }
  }
  const std::uint16_t received = static_cast<std::uint16_t>(data[8] | (data[9] << 8));
  if (crc16(std::span(data).first(8)) != received) return {FrameStatus::kCrcError, std::nullopt};

  std::uint64_t word = 0;
  for (std::size_t i = 0; i < 8; ++i) word |= std::uint64_t{data[i]} << (8 * i);
  DecodedFrame out;
  out.tag = TagId(static_cast<std::uint16_t>((word >> 38) & TagId::kMaxCountry), word & TagId::kMaxNational);
  out.flags.data_block = (word >> 48) & 1;
  out.flags.animal = (word >> 63) & 1;
  out.extension = data[10] | (data[11] << 8) | (std::uint32_t{data[12]} << 16);
  return {FrameStatus::kOk, out};
}

std::optional<RfidDetection> simulate_pass(const TagId& tag, double p_detect, Millis ts,
                                           StationId station_id, std::mt19937_64& rng) {
  std::bernoulli_distribution read(std::clamp(p_detect, 0.0, 1.0));
  if (!read(rng)) return std::nullopt;
  return RfidDetection{tag, ts, station_id};
}

namespace {

struct Candidate {
  TagId tag;
  Millis distance = 0;
  bool entry_side = true;
};

struct Score {
  std::size_t assigned = 0;
  Millis total_distance = 0;
  std::size_t entry_side = 0;

  bool better_than(const Score& o) const {
    if (assigned != o.assigned) return assigned > o.assigned;
    if (total_distance != o.total_distance) return total_distance < o.total_distance;
    return entry_side > o.entry_side;
  }
};

class Assigner {
 public:
  explicit Assigner(const std::vector<std::vector<Candidate>>& cands)
      : cands_(cands), current_(cands.size(), -1), best_(cands.size(), -1) {}

  std::vector<int> solve() {
    search(0, Score{});
    return best_;
  }

 private:
  void search(std::size_t v, Score score) {
    if (v == cands_.size()) {
      if (!have_best_ || score.better_than(best_score_)) {
        have_best_ = true;
        best_score_ = score;
        best_ = current_;
      }
      return;
    }
    for (std::size_t c = 0; c < cands_[v].size(); ++c) {
      const auto& cand = cands_[v][c];
      bool taken = false;
      for (std::size_t u = 0; u < v; ++u) {
        if (current_[u] >= 0 && cands_[u][static_cast<std::size_t>(current_[u])].tag == cand.tag) taken = true;
      }
      if (taken) continue;
      current_[v] = static_cast<int>(c);
      Score next = score;
      ++next.assigned;
      next.total_distance += cand.distance;
      next.entry_side += cand.entry_side ? 1 : 0;
      search(v + 1, next);
    }
    current_[v] = -1;
    search(v + 1, score);
  }

  const std::vector<std::vector<Candidate>>& cands_;
  std::vector<int> current_;
  std::vector<int> best_;
  Score best_score_;
  bool have_best_ = false;
};

constexpr std::size_t kExhaustiveLimit = 8;

std::vector<int> greedy_assign(const std::vector<std::vector<Candidate>>& cands) {
  struct Pair {
    Millis distance;
    bool entry_side;
    std::size_t visit;
    std::size_t cand;
  };
  std::vector<Pair> pairs;
  for (std::size_t v = 0; v < cands.size(); ++v) {
    for (std::size_t c = 0; c < cands[v].size(); ++c) pairs.push_back({cands[v][c].distance, cands[v][c].entry_side, v, c});
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.entry_side && !b.entry_side;
  });
  std::vector<int> out(cands.size(), -1);
  std::vector<TagId> used;
  for (const auto& p : pairs) {
    const auto& tag = cands[p.visit][p.cand].tag;
    if (out[p.visit] >= 0 || std::find(used.begin(), used.end(), tag) != used.end()) continue;
    out[p.visit] = static_cast<int>(p.cand);
    used.push_back(tag);
  }
  return out;
}

}  // namespace

MatchResult match_detections(std::vector<AnimalVisit> visits,
                             std::span<const RfidDetection> detections, Millis window_ms) {
  std::vector<std::vector<Candidate>> cands(visits.size());
  for (std::size_t v = 0; v < visits.size(); ++v) {
    for (const auto& d : detections) {
      const Millis to_entry = std::llabs(d.ts - visits[v].entry_ts);
      const Millis to_exit = std::llabs(d.ts - visits[v].exit_ts);
      const Millis dist = std::min(to_entry, to_exit);
      if (dist > window_ms) continue;
      const bool entry_side = to_entry <= to_exit;
      auto it = std::find_if(cands[v].begin(), cands[v].end(), [&](const Candidate& c) { return c.tag == d.tag; });
      if (it == cands[v].end()) {
        cands[v].push_back({d.tag, dist, entry_side});
      } else if (dist < it->distance || (dist == it->distance && entry_side && !it->entry_side)) {
        it->distance = dist;
        it->entry_side = entry_side;
      }
    }
    std::sort(cands[v].begin(), cands[v].end(), [](const Candidate& a, const Candidate& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      if (a.entry_side != b.entry_side) return a.entry_side;
      return a.tag < b.tag;
    });
  }

  const auto choice = visits.size() <= kExhaustiveLimit ? Assigner(cands).solve() : greedy_assign(cands);

  MatchResult result;
  std::vector<bool> consumed(detections.size(), false);
  for (std::size_t v = 0; v < visits.size(); ++v) {
    if (choice[v] < 0) continue;
    const auto& chosen = cands[v][static_cast<std::size_t>(choice[v])];
    visits[v].tag = chosen.tag;
    for (const auto& other : cands[v]) {
      if (other.tag != chosen.tag && other.distance == chosen.distance) {
        visits[v].quality |= kQualityAmbiguousTag;
      }
    }
    for (std::size_t i = 0; i < detections.size(); ++i) {
      const auto& d = detections[i];
      if (consumed[i] || d.tag != chosen.tag) continue;
      const Millis dist = std::min(std::llabs(d.ts - visits[v].entry_ts), std::llabs(d.ts - visits[v].exit_ts));
      if (dist <= window_ms) consumed[i] = true;
    }
  }
  for (std::size_t i = 0; i < consumed.size(); ++i) {
    if (consumed[i]) result.consumed.push_back(i);
  }
  result.visits = std::move(visits);
  return result;
}

AnimalVisit match_detections(const AnimalVisit& visit, std::span<const RfidDetection> detections,
                             Millis window_ms) {
  return match_detections(std::vector<AnimalVisit>{visit}, detections, window_ms).visits.front();
}

std::string to_line(const RfidDetection& detection) {
  return fmt::format("{},{},{}", detection.ts, detection.tag.country(), detection.tag.national());
}

RfidDetection parse_detection_line(std::string_view line, StationId station_id) {
  std::array<std::int64_t, 3> fields{};
  std::size_t pos = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    const auto end = f < 2 ? line.find(',', pos) : line.size();
    if (end == std::string_view::npos) throw std::invalid_argument(fmt::format("malformed detection '{}'", line));
    const auto field = line.substr(pos, end - pos);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), fields[f]);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
      throw std::invalid_argument(fmt::format("malformed detection '{}'", line));
    }
    pos = end + 1;
  }
  if (fields[1] < 0 || fields[2] < 0) throw std::invalid_argument(fmt::format("malformed detection '{}'", line));
  return RfidDetection{TagId(static_cast<std::uint16_t>(std::min<std::int64_t>(fields[1], 0xffff)),
                             static_cast<std::uint64_t>(fields[2])),
                       fields[0], station_id};
}

}  // namespace feeder::rfid
