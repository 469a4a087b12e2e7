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

// Station input traces: one timestamped record per line.
//
//   t_ms,grams                               scale sample
//   t_ms,country,national_id                 RFID detection
//   t_ms,frame,<32 hex chars>                raw FDX-B frame
//   t_ms,rfid_fault,0|1                      RFID reader lost / restored
//   t_ms,env,temp_in,temp_out,rh_in,rh_out   environment reading
//
// Blank lines and lines starting with '#' are skipped.

#ifndef FEEDER_TRACE_HPP
#define FEEDER_TRACE_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "feeder/rfid.hpp"
#include "feeder/types.hpp"
#include "feeder/weighing.hpp"

namespace feeder {

struct EnvReading {
  double temp_in = 24.0;
  double temp_out = 24.0;
  double rh_in = 60.0;
  double rh_out = 80.0;

  friend bool operator==(const EnvReading&, const EnvReading&) = default;
};

struct FrameInput {
  Millis ts = 0;
  rfid::FdxbFrame frame;
  friend bool operator==(const FrameInput&, const FrameInput&) = default;
};

struct RfidFaultInput {
  Millis ts = 0;
  bool down = true;
  friend bool operator==(const RfidFaultInput&, const RfidFaultInput&) = default;
};

struct EnvInput {
  Millis ts = 0;
  EnvReading env;
  friend bool operator==(const EnvInput&, const EnvInput&) = default;
};

using StationInput = std::variant<weighing::WeightSample, RfidDetection, FrameInput, RfidFaultInput, EnvInput>;

Millis input_time(const StationInput& in);

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// nullopt for blank and comment lines. Throws TraceParseError.
std::optional<StationInput> parse_trace_line(std::string_view line, std::size_t lineno,
                                             StationId station_id = 0);
std::vector<StationInput> parse_trace(std::istream& in, StationId station_id = 0);
std::vector<StationInput> load_trace(const std::filesystem::path& path, StationId station_id = 0);

std::string format_trace_line(const StationInput& in);
void write_trace(std::ostream& out, const std::vector<StationInput>& inputs);

}  // namespace feeder

#endif  // FEEDER_TRACE_HPP
