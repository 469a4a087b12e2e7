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

#include "feeder/trace.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace feeder {

Millis input_time(const StationInput& in) {
  return std::visit(
      [](const auto& v) -> Millis {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, weighing::WeightSample>) {
          return v.t;
        } else {
          return v.ts;
        }
      },
      in);
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T number(std::string_view field, std::size_t lineno, std::string_view what) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  T out{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw TraceParseError(lineno, fmt::format("{}: '{}' is not a number", what, field));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) throw TraceParseError(lineno, fmt::format("{} must be finite", what));
  }
  return out;
}

}  // namespace

std::optional<StationInput> parse_trace_line(std::string_view line, std::size_t lineno, StationId station_id) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
  if (line.empty() || line.front() == '#') return std::nullopt;

  const auto f = split(line);
  const auto t = number<Millis>(f[0], lineno, "timestamp");
  if (f.size() == 2) return weighing::WeightSample{t, number<double>(f[1], lineno, "grams")};
  if (f.size() < 3) throw TraceParseError(lineno, "expected at least two fields");

  const std::string_view kind = f[1];
  if (kind == "frame") {
    if (f.size() != 3) throw TraceParseError(lineno, "frame record takes one hex field");
    try {
      return FrameInput{t, rfid::FdxbFrame::from_hex(f[2])};
    } catch (const std::exception& e) {
      throw TraceParseError(lineno, e.what());
    }
  }
  if (kind == "rfid_fault") {
    if (f.size() != 3 || (f[2] != "0" && f[2] != "1")) throw TraceParseError(lineno, "rfid_fault takes 0 or 1");
    return RfidFaultInput{t, f[2] == "1"};
  }
  if (kind == "env") {
    if (f.size() != 6) throw TraceParseError(lineno, "env record takes four values");
    EnvReading env{number<double>(f[2], lineno, "temp_in"), number<double>(f[3], lineno, "temp_out"),
                   number<double>(f[4], lineno, "rh_in"), number<double>(f[5], lineno, "rh_out")};
    return EnvInput{t, env};
  }
  if (f.size() != 3) throw TraceParseError(lineno, fmt::format("unknown record kind '{}'", kind));
  const auto country = number<std::uint32_t>(f[1], lineno, "country");
  const auto national = number<std::uint64_t>(f[2], lineno, "national id");
  if (country > TagId::kMaxCountry || national > TagId::kMaxNational) {
    throw TraceParseError(lineno, "tag field out of range");
  }
  return RfidDetection{TagId(static_cast<std::uint16_t>(country), national), t, station_id};
}

std::vector<StationInput> parse_trace(std::istream& in, StationId station_id) {
  std::vector<StationInput> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto rec = parse_trace_line(line, lineno, station_id)) out.push_back(std::move(*rec));
  }
  return out;
}

std::vector<StationInput> load_trace(const std::filesystem::path& path, StationId station_id) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read trace {}", path.string()));
  return parse_trace(in, station_id);
}

std::string format_trace_line(const StationInput& in) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, weighing::WeightSample>) {
          return fmt::format("{},{:.3f}", v.t, v.grams);
        } else if constexpr (std::is_same_v<T, RfidDetection>) {
          return fmt::format("{},{},{}", v.ts, v.tag.country(), v.tag.national());
        } else if constexpr (std::is_same_v<T, FrameInput>) {
          return fmt::format("{},frame,{}", v.ts, v.frame.hex());
        } else if constexpr (std::is_same_v<T, RfidFaultInput>) {
          return fmt::format("{},rfid_fault,{}", v.ts, v.down ? 1 : 0);
        } else {
          return fmt::format("{},env,{},{},{},{}", v.ts, v.env.temp_in, v.env.temp_out, v.env.rh_in, v.env.rh_out);
        }
      },
      in);
}

void write_trace(std::ostream& out, const std::vector<StationInput>& inputs) {
  for (const auto& in : inputs) out << format_trace_line(in) << '\n';
}

}  // namespace feeder
