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

// Reference implementations used only by tests. Each one is written the slow,
// obvious way and shares no code with the library.

#ifndef FEEDER_TESTS_ORACLES_HPP
#define FEEDER_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "feeder/codec.hpp"
#include "feeder/types.hpp"
#include "feeder/weighing.hpp"

namespace oracle {

using feeder::Millis;
using feeder::TagId;
using feeder::weighing::WeightSample;

// Stability windows -----------------------------------------------------------

struct Window {
  std::size_t first = 0;
  std::size_t last = 0;
};

/// Visits every (i, j) pair, keeps the windows whose consecutive steps all stay
/// within `max_step` and that span `min_samples`, then keeps those no neighbouring
/// sample could extend.
inline std::vector<Window> stability_windows(const std::vector<WeightSample>& s, double max_step = 1.0,
                                             std::size_t min_samples = 20) {
  std::vector<Window> valid;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = i; j < s.size(); ++j) {
      if (j > i && std::abs(s[j].grams - s[j - 1].grams) > max_step) break;
      if (j - i + 1 >= min_samples) valid.push_back({i, j});
    }
  }
  // A valid window is maximal when neither neighbour could extend it.
  auto joins = [&](std::size_t a, std::size_t b) { return std::abs(s[b].grams - s[a].grams) <= max_step; };
  std::vector<Window> maximal;
  for (const auto& w : valid) {
    const bool left = w.first > 0 && joins(w.first - 1, w.first);
    const bool right = w.last + 1 < s.size() && joins(w.last, w.last + 1);
    if (!left && !right) maximal.push_back(w);
  }
  std::sort(maximal.begin(), maximal.end(), [](const Window& a, const Window& b) { return a.first < b.first; });
  return maximal;
}

// Attribution -----------------------------------------------------------------

/// All ways to pair exits with entrances such that every animal leaves after
/// it entered. Picks the assignment with the most pairs inside `tolerance`,
/// then the smallest total mismatch, then first-in-first-out order.
/// Returns, for each exit, the entrance index.
inline std::vector<std::size_t> pair_exits(const std::vector<std::pair<Millis, double>>& entrances,
                                           const std::vector<std::pair<Millis, double>>& exits,
                                           double tolerance = 2.0) {
  std::vector<std::size_t> perm(entrances.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best;
  std::size_t best_within = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    bool causal = true;
    std::size_t within = 0;
    double cost = 0.0;
    for (std::size_t x = 0; x < exits.size(); ++x) {
      const auto& in = entrances[perm[x]];
      if (in.first >= exits[x].first) causal = false;
      const double diff = std::abs(in.second - exits[x].second);
      cost += diff;
      if (diff <= tolerance) ++within;
    }
    if (!causal) continue;
    const bool better = best.empty() || within > best_within ||
                        (within == best_within && cost < best_cost - 1e-9) ||
                        (within == best_within && std::abs(cost - best_cost) <= 1e-9 &&
                         std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(exits.size())) < best);
    if (better) {
      best.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(exits.size()));
      best_within = within;
      best_cost = cost;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Segmentation ----------------------------------------------------------------

struct Visit {
  double weight = 0.0;
  Millis entry_ts = 0;
  Millis exit_ts = 0;
};

/// Offline segmentation of a noise-free stream that starts empty: plateaus are
/// the maximal stability windows, a change of more than `threshold` between
/// consecutive plateaus is an entrance or exit stamped with the first sample
/// past the threshold, and exits are paired with entrances exhaustively once
/// the scale is empty again.
inline std::vector<Visit> segment(const std::vector<WeightSample>& s, double threshold = 20.0) {
  const auto windows = stability_windows(s);
  std::vector<Visit> out;
  if (windows.empty()) return out;
  auto mean = [&](const Window& w) {
    double sum = 0.0;
    for (std::size_t i = w.first; i <= w.last; ++i) sum += s[i].grams;
    return sum / static_cast<double>(w.last - w.first + 1);
  };

  double level = mean(windows.front());
  std::size_t prev_end = windows.front().last;
  std::vector<std::pair<Millis, double>> entrances;
  std::vector<std::pair<Millis, double>> exits;
  for (std::size_t k = 1; k < windows.size(); ++k) {
    const double next = mean(windows[k]);
    const double shift = next - level;
    if (std::abs(shift) <= threshold) {
      level = next;
      prev_end = windows[k].last;
      continue;
    }
    Millis ts = s[windows[k].first].t;
    for (std::size_t i = prev_end + 1; i <= windows[k].first; ++i) {
      if (shift > 0 ? s[i].grams > level + threshold : s[i].grams < level - threshold) {
        ts = s[i].t;
        break;
      }
    }
    if (shift > 0) {
      entrances.emplace_back(ts, shift);
    } else {
      exits.emplace_back(ts, -shift);
    }
    level = next;
    prev_end = windows[k].last;
    if (!entrances.empty() && entrances.size() == exits.size()) {
      const auto pairing = pair_exits(entrances, exits);
      std::vector<Visit> group(entrances.size());
      for (std::size_t e = 0; e < entrances.size(); ++e) group[e] = {entrances[e].second, entrances[e].first, 0};
      for (std::size_t x = 0; x < exits.size(); ++x) group[pairing[x]].exit_ts = exits[x].first;
      out.insert(out.end(), group.begin(), group.end());
      entrances.clear();
      exits.clear();
    }
  }
  return out;
}

// FDX-B -----------------------------------------------------------------------

/// CRC-16/KERMIT computed the textbook way: reverse each input byte, run the
/// MSB-first 0x1021 register, reverse the result.
inline std::uint16_t crc16_kermit(const std::vector<std::uint8_t>& data) {
  auto rev8 = [](std::uint8_t b) {
    std::uint8_t r = 0;
    for (int i = 0; i < 8; ++i) r = static_cast<std::uint8_t>(r | (((b >> i) & 1) << (7 - i)));
    return r;
  };
  std::uint16_t reg = 0;
  for (std::uint8_t byte : data) {
    const std::uint8_t b = rev8(byte);
    for (int i = 7; i >= 0; --i) {
      const bool in = (b >> i) & 1;
      const bool top = (reg >> 15) & 1;
      reg = static_cast<std::uint16_t>(reg << 1);
      if (in != top) reg ^= 0x1021;
    }
  }
  std::uint16_t out = 0;
  for (int i = 0; i < 16; ++i) out = static_cast<std::uint16_t>(out | (((reg >> i) & 1) << (15 - i)));
  return out;
}

/// The 128 transmitted bits as a '0'/'1' string.
inline std::string fdxb_bits(const TagId& tag, bool animal, bool data_block, std::uint32_t extension) {
  std::vector<std::uint8_t> bytes;
  std::uint64_t word = tag.national() | (std::uint64_t{tag.country()} << 38);
  if (data_block) word |= std::uint64_t{1} << 48;
  if (animal) word |= std::uint64_t{1} << 63;
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(word >> (8 * i)));
  const std::uint16_t crc = crc16_kermit(bytes);
  bytes.push_back(static_cast<std::uint8_t>(crc & 0xff));
  bytes.push_back(static_cast<std::uint8_t>(crc >> 8));
  for (int i = 0; i < 3; ++i) bytes.push_back(static_cast<std::uint8_t>(extension >> (8 * i)));

  std::string bits = "10000000000";
  for (std::uint8_t b : bytes) {
    for (int i = 0; i < 8; ++i) bits += ((b >> i) & 1) ? '1' : '0';
    bits += '1';
  }
  return bits;
}

// Codec -----------------------------------------------------------------------

/// Builds the payload from the layout table as a string of bits.
class BitString {
 public:
  void put(std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) bits_ += ((v >> i) & 1) ? '1' : '0';
  }
  void tag(const std::optional<TagId>& t) {
    put(t ? 1 : 0, 1);
    put(t ? t->country() : 0, 10);
    put(t ? t->national() : 0, 38);
  }
  std::vector<std::uint8_t> bytes() const {
    std::string padded = bits_;
    while (padded.size() % 8 != 0) padded += '0';
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < padded.size(); i += 8) {
      out.push_back(static_cast<std::uint8_t>(std::stoi(padded.substr(i, 8), nullptr, 2)));
    }
    return out;
  }
  std::size_t size() const { return bits_.size(); }

 private:
  std::string bits_;
};

inline std::vector<std::uint8_t> encode(const feeder::codec::Message& msg) {
  using namespace feeder::codec;
  BitString b;
  if (const auto* m = std::get_if<SystemUpdate>(&msg)) {
    b.put(0x1, 4), b.put(1, 4), b.put(m->seq, 16), b.put(m->ts, 32);
    b.put(m->temp_in, 12), b.put(m->temp_out, 12), b.put(m->rh_in, 10), b.put(m->rh_out, 10);
    b.put(m->error_flags, 16);
  } else if (const auto* m = std::get_if<AnimalUpdate>(&msg)) {
    b.put(0x2, 4), b.put(1, 4), b.put(m->seq, 16), b.tag(m->tag);
    b.put(m->entry_ts, 32), b.put(m->exit_ts, 32), b.put(m->weight, 16), b.put(m->std, 10);
  } else if (const auto* m = std::get_if<DbSyncRequest>(&msg)) {
    b.put(0x3, 4), b.put(1, 4), b.put(m->seq, 16), b.put(m->last_updated, 32);
  } else if (const auto* m = std::get_if<TrapEvent>(&msg)) {
    b.put(0x4, 4), b.put(1, 4), b.put(m->seq, 16), b.put(m->ts, 32), b.tag(m->tag);
  } else if (const auto* m = std::get_if<TrapUpdate>(&msg)) {
    b.put(0x8, 4), b.put(1, 4), b.put(m->server_time, 32);
    b.put(m->master.has_value(), 1), b.put(m->master.value_or(false), 1), b.put(m->more_follows, 1);
    b.put(m->ops.size(), 4), b.put(m->part, 4);
    for (const auto& op : m->ops) {
      b.put(op.kind == TagOpKind::kRemove, 1), b.put(op.tag.country(), 10), b.put(op.tag.national(), 38);
    }
  }
  return b.bytes();
}

// Random valid messages ------------------------------------------------------

inline TagId random_tag(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint16_t> c(0, TagId::kMaxCountry);
  std::uniform_int_distribution<std::uint64_t> n(0, TagId::kMaxNational);
  return TagId(c(rng), n(rng));
}

inline std::optional<TagId> maybe_tag(std::mt19937_64& rng) {
  if (std::bernoulli_distribution(0.2)(rng)) return std::nullopt;
  return random_tag(rng);
}

inline feeder::codec::Message random_message(std::mt19937_64& rng) {
  using namespace feeder::codec;
  auto u = [&](std::uint64_t hi) { return std::uniform_int_distribution<std::uint64_t>(0, hi)(rng); };
  switch (u(4)) {
    case 0:
      return SystemUpdate{static_cast<std::uint16_t>(u(0xffff)), static_cast<std::uint32_t>(u(0xffffffff)),
                          static_cast<std::uint16_t>(u(4095)),   static_cast<std::uint16_t>(u(4095)),
                          static_cast<std::uint16_t>(u(1000)),   static_cast<std::uint16_t>(u(1000)),
                          static_cast<std::uint16_t>(u(kErrDefinedMask))};
    case 1:
      return AnimalUpdate{static_cast<std::uint16_t>(u(0xffff)), maybe_tag(rng),
                          static_cast<std::uint32_t>(u(0xffffffff)), static_cast<std::uint32_t>(u(0xffffffff)),
                          static_cast<std::uint32_t>(u(0xffff)), static_cast<std::uint16_t>(u(1023))};
    case 2:
      return DbSyncRequest{static_cast<std::uint16_t>(u(0xffff)), static_cast<std::uint32_t>(u(0xffffffff))};
    case 3:
      return TrapEvent{static_cast<std::uint16_t>(u(0xffff)), static_cast<std::uint32_t>(u(0xffffffff)),
                       maybe_tag(rng)};
    default: {
      TrapUpdate t;
      t.server_time = static_cast<std::uint32_t>(u(0xffffffff));
      switch (u(2)) {
        case 0: break;
        case 1: t.master = false; break;
        default: t.master = true; break;
      }
      t.more_follows = u(1) == 1;
      t.part = static_cast<std::uint8_t>(u(15));
      const auto n = u(kMaxTrapOps);
      for (std::uint64_t i = 0; i < n; ++i) {
        t.ops.push_back({u(1) ? TagOpKind::kRemove : TagOpKind::kAdd, random_tag(rng)});
      }
      return t;
    }
  }
}

// Trap ledger -----------------------------------------------------------------

/// Final target set after replaying (tag-or-master, add/remove, master) changes
/// in order.
struct LedgerChange {
  std::optional<TagId> tag;
  bool add = true;
  bool master = false;
};

inline std::pair<std::set<TagId>, bool> fold(const std::vector<LedgerChange>& changes) {
  std::set<TagId> set;
  bool master = false;
  for (const auto& c : changes) {
    if (!c.tag) {
      master = c.master;
    } else if (c.add) {
      set.insert(*c.tag);
    } else {
      set.erase(*c.tag);
    }
  }
  return {set, master};
}

}  // namespace oracle

#endif  // FEEDER_TESTS_ORACLES_HPP
