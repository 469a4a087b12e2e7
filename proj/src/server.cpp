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

#include "feeder/server.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>

#include <fmt/format.h>
#include <json.hpp>

namespace feeder::server {

using json = nlohmann::json;

std::string_view to_string(IngestResult::Status status) {
  switch (status) {
    case IngestResult::Status::kStored: return "stored";
    case IngestResult::Status::kDuplicate: return "duplicate";
    case IngestResult::Status::kQuarantined: return "quarantined";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Storage

FileStorage::FileStorage(std::filesystem::path path) : path_(std::move(path)) {}

FileStorage::~FileStorage() {
  if (file_ != nullptr) std::fclose(file_);
}

void FileStorage::append(const std::string& record) {
  if (file_ == nullptr) {
    file_ = std::fopen(path_.c_str(), "ab");
    if (file_ == nullptr) throw std::runtime_error(fmt::format("cannot open journal {}", path_.string()));
  }
  const std::string line = record + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw std::runtime_error(fmt::format("journal write failed: {}", path_.string()));
  }
}

void FileStorage::replay(const std::function<void(const std::string&)>& fn) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: torn write
    if (!line.empty()) fn(line);
  }
}

// ---------------------------------------------------------------------------
// Filters

void VisitFilter::validate() const {
  if (from_ts && to_ts && *from_ts > *to_ts) throw ValidationError("time range: from is after to");
  auto check_weight = [](const std::optional<double>& w, std::string_view name) {
    if (w && (!std::isfinite(*w) || *w < 0.0)) {
      throw ValidationError(fmt::format("{} must be a non-negative number", name));
    }
  };
  check_weight(min_weight, "min_weight");
  check_weight(max_weight, "max_weight");
  check_weight(max_std, "max_std");
  if (min_weight && max_weight && *min_weight > *max_weight) {
    throw ValidationError("weight range: min_weight exceeds max_weight");
  }
  if (tag && untagged_only) throw ValidationError("tag and untagged are mutually exclusive");
}

bool VisitFilter::matches(const StoredVisit& v) const {
  if (station && v.station_id != *station) return false;
  if (tag && v.tag != tag) return false;
  if (untagged_only && v.tag) return false;
  if (from_ts && v.entry_ts < *from_ts) return false;
  if (to_ts && v.entry_ts >= *to_ts) return false;
  if (min_weight && v.weight_grams < *min_weight) return false;
  if (max_weight && v.weight_grams > *max_weight) return false;
  if (max_std && v.std_grams > *max_std) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Server

namespace {

std::optional<TagId> tag_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return TagId::parse(j.get<std::string>());
}

json tag_to_json(const std::optional<TagId>& tag) {
  return tag ? json(tag->str()) : json(nullptr);
}

std::string encode_cursor(const StoredVisit& v) {
  return fmt::format("{}:{}:{}", v.entry_ts, v.station_id, v.seq);
}

std::tuple<Seconds, StationId, std::uint16_t> decode_cursor(const std::string& cursor) {
  unsigned long long parts[3] = {0, 0, 0};
  const char* p = cursor.data();
  const char* end = p + cursor.size();
  for (int i = 0; i < 3; ++i) {
    auto [next, ec] = std::from_chars(p, end, parts[i]);
    if (ec != std::errc() || next == p) throw ValidationError("malformed cursor");
    p = next;
    if (i < 2) {
      if (p == end || *p != ':') throw ValidationError("malformed cursor");
      ++p;
    }
  }
  if (p != end || parts[0] > 0xffffffffULL || parts[1] > 0xffffULL || parts[2] > 0xffffULL) {
    throw ValidationError("malformed cursor");
  }
  return {static_cast<Seconds>(parts[0]), static_cast<StationId>(parts[1]), static_cast<std::uint16_t>(parts[2])};
}

}  // namespace

Server::Server(std::unique_ptr<Storage> storage, ServerOptions options)
    : storage_(std::move(storage)), options_(options) {
  auto journal = std::move(storage_);
  storage_ = std::make_unique<MemoryStorage>();
  journal->replay([this](const std::string& record) { apply_record(record); });
  storage_ = std::move(journal);
}

void Server::apply_record(const std::string& record) {
  json j;
  try {
    j = json::parse(record);
  } catch (const json::exception&) {
    return;  // a damaged journal line is skipped
  }
  const std::string kind = j.value("kind", "");
  if (kind == "uplink") {
    const Bytes payload = from_hex(j.at("payload").get<std::string>());
    ingest(j.at("station").get<StationId>(), payload, j.at("received").get<Millis>());
  } else if (kind == "ledger") {
    std::unique_lock lock(mu_);
    LedgerEntry e;
    e.station_id = j.at("station").get<StationId>();
    e.tag = tag_from_json(j.at("tag"));
    e.kind = j.at("op").get<std::string>() == "remove" ? codec::TagOpKind::kRemove : codec::TagOpKind::kAdd;
    e.master = j.value("master", false);
    e.change_ts = j.at("change_ts").get<Seconds>();
    e.operator_id = j.at("operator").get<std::string>();
    auto& st = stations_[e.station_id];
    st.last_stamp = std::max(st.last_stamp, e.change_ts);
    st.ledger.push_back(std::move(e));
  } else if (kind == "ack_captures") {
    acknowledge_captures(j.at("station").get<StationId>());
  }
}

void Server::remember_seq(StationState& st, std::uint16_t seq, std::optional<Bytes> downlink) {
  st.seen[seq] = SeqRecord{std::move(downlink)};
  st.seen_order.push_back(seq);
  while (st.seen_order.size() > options_.dedup_window) {
    st.seen.erase(st.seen_order.front());
    st.seen_order.pop_front();
  }
}

IngestResult Server::ingest(StationId station_id, std::span<const std::uint8_t> payload, Millis now) {
  std::optional<codec::Message> msg;
  std::string error;
  try {
    msg = codec::decode(payload);
  } catch (const codec::DecodeError& e) {
    error = fmt::format("{}: {}", codec::to_string(e.kind()), e.what());
  }
  if (msg && std::holds_alternative<codec::TrapUpdate>(*msg)) {
    msg.reset();
    error = "downlink message received as uplink";
  }

  std::unique_lock lock(mu_);
  IngestResult result;
  if (!msg) {
    quarantine_.push_back({station_id, Bytes(payload.begin(), payload.end()), error, now});
    storage_->append(json{{"kind", "uplink"}, {"station", station_id}, {"payload", to_hex(payload)}, {"received", now}}.dump());
    result.status = IngestResult::Status::kQuarantined;
    result.ack = false;
    return result;
  }

  auto& st = stations_[station_id];
  st.last_seen = std::max(st.last_seen, now);
  const std::uint16_t seq = *codec::seq_of(*msg);
  if (auto it = st.seen.find(seq); it != st.seen.end()) {
    ++duplicates_;
    result.status = IngestResult::Status::kDuplicate;
    result.ack = true;
    result.downlink = it->second.downlink;
    return result;
  }

  storage_->append(json{{"kind", "uplink"}, {"station", station_id}, {"payload", to_hex(payload)}, {"received", now}}.dump());
  std::optional<Bytes> downlink;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, codec::SystemUpdate>) {
          StatusRow row{station_id,          m.seq,
                        m.ts,                codec::celsius(m.temp_in),
                        codec::celsius(m.temp_out), codec::percent(m.rh_in),
                        codec::percent(m.rh_out),   m.error_flags,
                        now};
          st.last_status = row;
          ++st.status_count;
        } else if constexpr (std::is_same_v<T, codec::AnimalUpdate>) {
          StoredVisit v{station_id, m.seq, m.tag, m.entry_ts, m.exit_ts, m.weight / 10.0, m.std / 10.0, now};
          visits_[{v.entry_ts, v.station_id, v.seq}] = v;
          ++st.visit_count;
        } else if constexpr (std::is_same_v<T, codec::TrapEvent>) {
          captures_.push_back({station_id, m.seq, m.ts, m.tag, now, false});
          ++st.capture_count;
        } else if constexpr (std::is_same_v<T, codec::DbSyncRequest>) {
          st.last_sync_request = m.last_updated;
          const auto chain = delta_locked(st, m.last_updated, to_seconds(now));
          st.last_issued = std::max(st.last_issued, chain.front().server_time);
          downlink = codec::encode(chain.front());
        }
      },
      *msg);
  remember_seq(st, seq, downlink);
  result.status = IngestResult::Status::kStored;
  result.ack = true;
  result.downlink = std::move(downlink);
  return result;
}

std::vector<codec::TrapUpdate> Server::delta_locked(const StationState& st, Seconds last_updated,
                                                    Seconds now_s) const {
  // Fold to the last change per key (tag, or master when tag is empty).
  std::map<std::optional<TagId>, const LedgerEntry*> last;
  for (const auto& e : st.ledger) {
    if (e.change_ts > last_updated) last[e.tag] = &e;
  }
  std::vector<const LedgerEntry*> items;
  items.reserve(last.size());
  for (const auto& [key, e] : last) items.push_back(e);
  std::sort(items.begin(), items.end(),
            [](const LedgerEntry* a, const LedgerEntry* b) { return a->change_ts < b->change_ts; });

  // Change stamps are unique per station, so every chunk boundary is a
  // point in time: an intermediate chunk's server_time covers exactly the
  // changes it carries, and re-requesting from there yields the rest.
  std::vector<codec::TrapUpdate> chain;
  codec::TrapUpdate cur;
  Seconds cur_max = last_updated;
  for (const auto* e : items) {
    if (e->tag && cur.ops.size() == codec::kMaxTrapOps) {
      cur.server_time = cur_max;
      cur.more_follows = true;
      chain.push_back(std::move(cur));
      cur = codec::TrapUpdate{};
      cur.part = static_cast<std::uint8_t>(chain.size() & 0x0f);
    }
    if (e->tag) {
      cur.ops.push_back({e->kind, *e->tag});
    } else {
      cur.master = e->master;
    }
    cur_max = std::max(cur_max, e->change_ts);
  }
  cur.server_time = std::max({now_s, cur_max, last_updated});
  cur.more_follows = false;
  chain.push_back(std::move(cur));
  return chain;
}

std::vector<codec::TrapUpdate> Server::trap_delta(StationId station_id, Seconds last_updated, Millis now) const {
  std::shared_lock lock(mu_);
  auto it = stations_.find(station_id);
  if (it == stations_.end()) {
    codec::TrapUpdate empty;
    empty.server_time = std::max(to_seconds(now), last_updated);
    return {empty};
  }
  return delta_locked(it->second, last_updated, to_seconds(now));
}

std::vector<LedgerEntry> Server::set_trap_targets(StationId station_id, const std::vector<TargetChange>& changes,
                                                  const std::string& operator_id, Millis now) {
  if (changes.empty()) throw ValidationError("no changes given");
  if (operator_id.empty()) throw ValidationError("operator id is required");

  std::unique_lock lock(mu_);
  auto& st = stations_[station_id];
  std::vector<LedgerEntry> out;
  Seconds stamp = std::max({to_seconds(now), st.last_stamp + 1, st.last_issued + 1});
  for (const auto& c : changes) {
    LedgerEntry e{station_id, c.tag, c.kind, c.master, stamp++, operator_id};
    storage_->append(json{{"kind", "ledger"},
                          {"station", station_id},
                          {"tag", tag_to_json(e.tag)},
                          {"op", e.kind == codec::TagOpKind::kRemove ? "remove" : "add"},
                          {"master", e.master},
                          {"change_ts", e.change_ts},
                          {"operator", e.operator_id}}
                         .dump());
    st.last_stamp = e.change_ts;
    st.ledger.push_back(e);
    out.push_back(std::move(e));
  }
  return out;
}

std::pair<std::set<TagId>, bool> Server::trap_targets(StationId station_id) const {
  std::shared_lock lock(mu_);
  std::set<TagId> tags;
  bool master = false;
  auto it = stations_.find(station_id);
  if (it == stations_.end()) return {tags, master};
  for (const auto& e : it->second.ledger) {
    if (!e.tag) {
      master = e.master;
    } else if (e.kind == codec::TagOpKind::kAdd) {
      tags.insert(*e.tag);
    } else {
      tags.erase(*e.tag);
    }
  }
  return {tags, master};
}

VisitPage Server::query_visits(const VisitFilter& filter, std::optional<std::string> cursor,
                               std::optional<std::size_t> limit) const {
  filter.validate();
  const std::size_t page = std::min(limit.value_or(options_.default_page_size), options_.max_page_size);
  if (page == 0) throw ValidationError("limit must be positive");

  std::shared_lock lock(mu_);
  auto it = visits_.begin();
  if (cursor) it = visits_.upper_bound(decode_cursor(*cursor));
  VisitPage out;
  for (; it != visits_.end(); ++it) {
    if (!filter.matches(it->second)) continue;
    if (out.visits.size() == page) {
      out.next_cursor = encode_cursor(out.visits.back());
      break;
    }
    out.visits.push_back(it->second);
  }
  return out;
}

std::string Server::csv_header() { return "station_id,seq,tag,entry_ts,exit_ts,weight_g,std_g\n"; }

std::string Server::csv_row(const StoredVisit& v) {
  return fmt::format("{},{},{},{},{},{:.1f},{:.1f}\n", v.station_id, v.seq, v.tag ? v.tag->str() : "", v.entry_ts,
                     v.exit_ts, v.weight_grams, v.std_grams);
}

void Server::export_csv(const VisitFilter& filter, std::ostream& out) const {
  filter.validate();
  out << csv_header();
  std::optional<std::string> cursor;
  do {
    auto page = query_visits(filter, cursor, options_.max_page_size);
    for (const auto& v : page.visits) out << csv_row(v);
    cursor = std::move(page.next_cursor);
  } while (cursor);
}

std::vector<StationStatus> Server::status() const {
  std::shared_lock lock(mu_);
  std::vector<StationStatus> out;
  for (const auto& [id, st] : stations_) {
    out.push_back({id, st.last_status, st.status_count, st.visit_count, st.capture_count, st.last_seen,
                   st.last_issued, st.last_sync_request});
  }
  return out;
}

std::vector<CaptureRow> Server::captures() const {
  std::shared_lock lock(mu_);
  return captures_;
}

std::size_t Server::acknowledge_captures(StationId station_id) {
  std::unique_lock lock(mu_);
  std::size_t n = 0;
  for (auto& c : captures_) {
    if (c.station_id == station_id && !c.acknowledged) {
      c.acknowledged = true;
      ++n;
    }
  }
  if (n > 0) storage_->append(json{{"kind", "ack_captures"}, {"station", station_id}}.dump());
  return n;
}

std::vector<QuarantineRow> Server::quarantine() const {
  std::shared_lock lock(mu_);
  return quarantine_;
}

std::vector<LedgerEntry> Server::ledger(StationId station_id) const {
  std::shared_lock lock(mu_);
  auto it = stations_.find(station_id);
  return it == stations_.end() ? std::vector<LedgerEntry>{} : it->second.ledger;
}

std::size_t Server::visit_count() const {
  std::shared_lock lock(mu_);
  return visits_.size();
}

std::size_t Server::duplicate_count() const {
  std::shared_lock lock(mu_);
  return duplicates_;
}

}  // namespace feeder::server
