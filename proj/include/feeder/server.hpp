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

// Telemetry backend: uplink ingestion with (station, seq) deduplication,
// visit queries and CSV export, and the per-station trap target ledger from
// which TrapUpdate downlinks are derived.

#ifndef FEEDER_SERVER_HPP
#define FEEDER_SERVER_HPP

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "feeder/codec.hpp"
#include "feeder/hex.hpp"
#include "feeder/types.hpp"

namespace feeder::server {

struct StoredVisit {
  StationId station_id = 0;
  std::uint16_t seq = 0;
  std::optional<TagId> tag;
  Seconds entry_ts = 0;
  Seconds exit_ts = 0;
  double weight_grams = 0.0;
  double std_grams = 0.0;
  Millis received_ts = 0;

  friend bool operator==(const StoredVisit&, const StoredVisit&) = default;
};

struct StatusRow {
  StationId station_id = 0;
  std::uint16_t seq = 0;
  Seconds ts = 0;
  double temp_in = 0.0;
  double temp_out = 0.0;
  double rh_in = 0.0;
  double rh_out = 0.0;
  std::uint16_t error_flags = 0;
  Millis received_ts = 0;
};

struct CaptureRow {
  StationId station_id = 0;
  std::uint16_t seq = 0;
  Seconds ts = 0;
  std::optional<TagId> tag;
  Millis received_ts = 0;
  bool acknowledged = false;  // operator has seen the notification
};

struct QuarantineRow {
  StationId station_id = 0;
  Bytes payload;
  std::string reason;
  Millis received_ts = 0;
};

/// One ledger change. A missing tag means the master entry.
struct LedgerEntry {
  StationId station_id = 0;
  std::optional<TagId> tag;
  codec::TagOpKind kind = codec::TagOpKind::kAdd;  // for tags
  bool master = false;                             // for the master entry
  Seconds change_ts = 0;
  std::string operator_id;
};

/// A requested change from an operator.
struct TargetChange {
  std::optional<TagId> tag;  // empty: master entry
  codec::TagOpKind kind = codec::TagOpKind::kAdd;
  bool master = false;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct VisitFilter {
  std::optional<StationId> station;
  std::optional<TagId> tag;
  bool untagged_only = false;
  std::optional<Seconds> from_ts;  // entry_ts >= from
  std::optional<Seconds> to_ts;    // entry_ts < to
  std::optional<double> min_weight;
  std::optional<double> max_weight;
  std::optional<double> max_std;  // quality threshold

  /// Throws ValidationError on inverted or negative ranges.
  void validate() const;
  bool matches(const StoredVisit& v) const;
};

struct VisitPage {
  std::vector<StoredVisit> visits;
  std::optional<std::string> next_cursor;
};

struct IngestResult {
  enum class Status { kStored, kDuplicate, kQuarantined };
  Status status = Status::kStored;
  bool ack = false;
  std::optional<Bytes> downlink;
};

std::string_view to_string(IngestResult::Status status);

struct StationStatus {
  StationId station_id = 0;
  std::optional<StatusRow> last_status;
  std::size_t status_count = 0;
  std::size_t visit_count = 0;
  std::size_t capture_count = 0;
  Millis last_seen = 0;
  Seconds last_issued_server_time = 0;
  std::optional<Seconds> last_sync_request;  // last_updated the station reported
};

/// Append-only record sink. The server replays it on startup.
class Storage {
 public:
  virtual ~Storage() = default;
  virtual void append(const std::string& record) = 0;
  virtual void replay(const std::function<void(const std::string&)>& fn) = 0;
};

/// Discards writes; state lives only in memory.
class MemoryStorage : public Storage {
 public:
  void append(const std::string&) override {}
  void replay(const std::function<void(const std::string&)>&) override {}
};

/// One JSON object per line in a journal file, flushed per record. A torn
/// last line is ignored on replay.
class FileStorage : public Storage {
 public:
  explicit FileStorage(std::filesystem::path path);
  ~FileStorage() override;
  void append(const std::string& record) override;
  void replay(const std::function<void(const std::string&)>& fn) override;

 private:
  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
};

struct ServerOptions {
  /// How many recent seqs per station are remembered for deduplication.
  std::size_t dedup_window = 16384;
  std::size_t default_page_size = 100;
  std::size_t max_page_size = 1000;
};

class Server {
 public:
  using Clock = std::function<Millis()>;

  explicit Server(std::unique_ptr<Storage> storage = std::make_unique<MemoryStorage>(),
                  ServerOptions options = {});

  /// Handles one uplink. Duplicates are acknowledged again (with the same
  /// downlink, if any) but stored once; undecodable payloads are quarantined
  /// and not acknowledged.
  IngestResult ingest(StationId station_id, std::span<const std::uint8_t> payload, Millis now);

  /// Chained downlinks carrying every ledger change after `last_updated`,
  /// folded to one op per tag. Each element encodes to one payload.
  std::vector<codec::TrapUpdate> trap_delta(StationId station_id, Seconds last_updated, Millis now) const;

  /// Appends changes to the ledger. Every change gets its own strictly
  /// increasing change_ts that is also later than any server time already
  /// issued to the station. Throws ValidationError for an empty change list
  /// or an empty operator id.
  std::vector<LedgerEntry> set_trap_targets(StationId station_id, const std::vector<TargetChange>& changes,
                                            const std::string& operator_id, Millis now);

  /// The station's target set as the ledger currently defines it.
  std::pair<std::set<TagId>, bool> trap_targets(StationId station_id) const;

  VisitPage query_visits(const VisitFilter& filter, std::optional<std::string> cursor = {},
                         std::optional<std::size_t> limit = {}) const;

  /// Writes the header and one row per matching visit, fetching one page at a
  /// time so memory stays bounded by the page size.
  void export_csv(const VisitFilter& filter, std::ostream& out) const;
  static std::string csv_header();
  static std::string csv_row(const StoredVisit& v);

  std::vector<StationStatus> status() const;
  std::vector<CaptureRow> captures() const;
  std::size_t acknowledge_captures(StationId station_id);
  std::vector<QuarantineRow> quarantine() const;
  std::vector<LedgerEntry> ledger(StationId station_id) const;
  std::size_t visit_count() const;
  std::size_t duplicate_count() const;

 private:
  using VisitKey = std::tuple<Seconds, StationId, std::uint16_t>;

  struct SeqRecord {
    std::optional<Bytes> downlink;
  };
  struct StationState {
    std::unordered_map<std::uint16_t, SeqRecord> seen;
    std::deque<std::uint16_t> seen_order;
    std::vector<LedgerEntry> ledger;
    Seconds last_stamp = 0;
    Seconds last_issued = 0;
    std::optional<Seconds> last_sync_request;
    std::optional<StatusRow> last_status;
    std::size_t status_count = 0;
    std::size_t visit_count = 0;
    std::size_t capture_count = 0;
    Millis last_seen = 0;
  };

  void apply_record(const std::string& record);
  void remember_seq(StationState& st, std::uint16_t seq, std::optional<Bytes> downlink);
  std::vector<codec::TrapUpdate> delta_locked(const StationState& st, Seconds last_updated, Seconds now_s) const;

  std::unique_ptr<Storage> storage_;
  ServerOptions options_;
  mutable std::shared_mutex mu_;
  std::map<StationId, StationState> stations_;
  std::map<VisitKey, StoredVisit> visits_;
  std::vector<CaptureRow> captures_;
  std::vector<QuarantineRow> quarantine_;
  std::size_t duplicates_ = 0;
};

}  // namespace feeder::server

#endif  // FEEDER_SERVER_HPP
