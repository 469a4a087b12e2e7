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

// Station configuration and its key-value text format (docs/formats.md).

#ifndef FEEDER_CONFIG_HPP
#define FEEDER_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "feeder/link.hpp"
#include "feeder/log.hpp"
#include "feeder/types.hpp"
#include "feeder/uplink_queue.hpp"
#include "feeder/weighing.hpp"

namespace feeder {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ConfigValue {
  std::string text;
  std::size_t line = 0;
};

/// `key = value` lines; `#` starts a comment. A repeated key is an error.
std::map<std::string, ConfigValue> parse_key_values(std::string_view text);

struct StationConfig {
  StationId station_id = 1;

  double entrance_grams = 20.0;
  double stability_delta_grams = 1.0;
  double stability_seconds = 1.0;
  double window_seconds = 1.0;
  int sample_rate_hz = 20;

  Millis system_update_period_ms = 600'000;
  Millis rfid_match_window_ms = 5'000;
  Millis db_sync_period_ms = 6 * 3'600'000;

  uplinkqueue::LinkModel link;
  uplinkqueue::RetryPolicy retry;

  /// Wire time of station clock zero, in Unix seconds.
  Seconds clock_origin_s = 0;
  /// Relative humidity inside the casing above which the ingress flag is set.
  double humidity_alarm_percent = 90.0;

  std::optional<std::filesystem::path> queue_path;
  std::optional<std::filesystem::path> trapdb_path;
  LogLevel log_level = LogLevel::kInfo;

  /// Throws ConfigError when a value is non-positive or out of range.
  void validate() const;

  weighing::EngineConfig engine_config() const;
  Seconds wire_time(Millis t) const { return clock_origin_s + to_seconds(t); }
};

/// Parses the text format. Unknown keys and bad values raise ConfigError with
/// the line number.
StationConfig parse_station_config(std::string_view text);
StationConfig load_station_config(const std::filesystem::path& path);

}  // namespace feeder

#endif  // FEEDER_CONFIG_HPP
