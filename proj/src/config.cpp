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

#include "feeder/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

namespace feeder {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(const ConfigValue& v, std::string_view key) {
  T out{};
  const char* first = v.text.data();
  const char* last = first + v.text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(v.line, fmt::format("{}: '{}' is not a valid number", key, v.text));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw ConfigError(v.line, fmt::format("{}: value must be finite", key));
  }
  return out;
}

}  // namespace

std::map<std::string, ConfigValue> parse_key_values(std::string_view text) {
  std::map<std::string, ConfigValue> out;
  std::size_t lineno = 0;
  while (!text.empty()) {
    ++lineno;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(lineno, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(lineno, "empty key");
    if (out.contains(key)) throw ConfigError(lineno, fmt::format("duplicate key '{}'", key));
    out.emplace(key, ConfigValue{value, lineno});
  }
  return out;
}

void StationConfig::validate() const {
  auto positive = [](double v, std::string_view name) {
    if (!(v > 0.0)) throw ConfigError(0, fmt::format("{} must be positive", name));
  };
  positive(entrance_grams, "entrance_grams");
  positive(stability_delta_grams, "stability_delta_grams");
  positive(stability_seconds, "stability_seconds");
  positive(window_seconds, "window_seconds");
  positive(sample_rate_hz, "sample_rate_hz");
  positive(static_cast<double>(system_update_period_ms), "system_update_period_s");
  positive(static_cast<double>(rfid_match_window_ms), "rfid_match_window_s");
  positive(static_cast<double>(db_sync_period_ms), "db_sync_period_s");
  positive(static_cast<double>(retry.confirm_timeout_ms), "retry.confirm_timeout_ms");
  positive(static_cast<double>(retry.backoff_base_ms), "retry.backoff_base_ms");
  if (retry.backoff_cap_ms < retry.backoff_base_ms) {
    throw ConfigError(0, "retry.backoff_cap_ms must not be below retry.backoff_base_ms");
  }
  if (retry.max_attempts && *retry.max_attempts == 0) throw ConfigError(0, "retry.max_attempts must be positive");
  try {
    link.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(0, e.what());
  }
}

weighing::EngineConfig StationConfig::engine_config() const {
  weighing::EngineConfig c;
  c.entrance_grams = entrance_grams;
  c.stability.max_step_grams = stability_delta_grams;
  c.stability.min_samples = static_cast<std::size_t>(std::lround(stability_seconds * sample_rate_hz));
  c.window_samples = static_cast<std::size_t>(std::lround(window_seconds * sample_rate_hz));
  c.station_id = station_id;
  return c;
}

StationConfig parse_station_config(std::string_view text) {
  StationConfig c;
  const auto kv = parse_key_values(text);

  using Setter = std::function<void(const ConfigValue&, std::string_view)>;
  auto seconds_to_ms = [](const ConfigValue& v, std::string_view k) {
    return static_cast<Millis>(std::llround(parse_number<double>(v, k) * 1000.0));
  };
  const std::map<std::string_view, Setter> setters = {
      {"station_id", [&](auto& v, auto k) { c.station_id = parse_number<StationId>(v, k); }},
      {"entrance_grams", [&](auto& v, auto k) { c.entrance_grams = parse_number<double>(v, k); }},
      {"stability_delta_grams", [&](auto& v, auto k) { c.stability_delta_grams = parse_number<double>(v, k); }},
      {"stability_seconds", [&](auto& v, auto k) { c.stability_seconds = parse_number<double>(v, k); }},
      {"window_seconds", [&](auto& v, auto k) { c.window_seconds = parse_number<double>(v, k); }},
      {"sample_rate_hz", [&](auto& v, auto k) { c.sample_rate_hz = parse_number<int>(v, k); }},
      {"system_update_period_s", [&](auto& v, auto k) { c.system_update_period_ms = seconds_to_ms(v, k); }},
      {"rfid_match_window_s", [&](auto& v, auto k) { c.rfid_match_window_ms = seconds_to_ms(v, k); }},
      {"db_sync_period_s", [&](auto& v, auto k) { c.db_sync_period_ms = seconds_to_ms(v, k); }},
      {"clock_origin_s", [&](auto& v, auto k) { c.clock_origin_s = parse_number<Seconds>(v, k); }},
      {"humidity_alarm_percent", [&](auto& v, auto k) { c.humidity_alarm_percent = parse_number<double>(v, k); }},
      {"link.uplink_drop", [&](auto& v, auto k) { c.link.uplink_drop = parse_number<double>(v, k); }},
      {"link.confirm_drop", [&](auto& v, auto k) { c.link.confirm_drop = parse_number<double>(v, k); }},
      {"link.latency_ms", [&](auto& v, auto k) { c.link.latency_ms = parse_number<Millis>(v, k); }},
      {"link.duty_cycle_gap_ms", [&](auto& v, auto k) { c.link.duty_cycle_gap_ms = parse_number<Millis>(v, k); }},
      {"retry.confirm_timeout_ms", [&](auto& v, auto k) { c.retry.confirm_timeout_ms = parse_number<Millis>(v, k); }},
      {"retry.backoff_base_ms", [&](auto& v, auto k) { c.retry.backoff_base_ms = parse_number<Millis>(v, k); }},
      {"retry.backoff_cap_ms", [&](auto& v, auto k) { c.retry.backoff_cap_ms = parse_number<Millis>(v, k); }},
      {"retry.max_attempts",
       [&](auto& v, auto k) {
         if (v.text == "unbounded") {
           c.retry.max_attempts.reset();
         } else {
           c.retry.max_attempts = parse_number<std::uint32_t>(v, k);
         }
       }},
      {"queue_path", [&](auto& v, auto) { c.queue_path = v.text; }},
      {"trapdb_path", [&](auto& v, auto) { c.trapdb_path = v.text; }},
      {"log_level",
       [&](auto& v, auto) {
         if (v.text == "debug") {
           c.log_level = LogLevel::kDebug;
         } else if (v.text == "info") {
           c.log_level = LogLevel::kInfo;
         } else if (v.text == "warn") {
           c.log_level = LogLevel::kWarn;
         } else if (v.text == "error") {
           c.log_level = LogLevel::kError;
         } else {
           throw ConfigError(v.line, fmt::format("log_level: unknown level '{}'", v.text));
         }
       }},
  };

  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(value.line, fmt::format("unknown key '{}'", key));
    it->second(value, key);
  }
  c.validate();
  return c;
}

StationConfig load_station_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, fmt::format("cannot read config {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_station_config(buf.str());
}

}  // namespace feeder
