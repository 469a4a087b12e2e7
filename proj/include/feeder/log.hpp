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

#ifndef FEEDER_LOG_HPP
#define FEEDER_LOG_HPP

#include <mutex>
#include <ostream>
#include <string_view>

#include "feeder/types.hpp"

namespace feeder {

enum class LogLevel { kDebug, kInfo, kWarn, kError };

std::string_view to_string(LogLevel level);

// Writes `ts level module message` lines. ts is the caller's clock (the
// station clock in simulation), not wall time. A null sink discards.
class Logger {
 public:
  Logger() = default;
  explicit Logger(std::ostream* sink, LogLevel min_level = LogLevel::kInfo)
      : sink_(sink), min_level_(min_level) {}

  void log(Millis ts, LogLevel level, std::string_view module, std::string_view message);

  void info(Millis ts, std::string_view module, std::string_view message) {
    log(ts, LogLevel::kInfo, module, message);
  }
  void warn(Millis ts, std::string_view module, std::string_view message) {
    log(ts, LogLevel::kWarn, module, message);
  }
  void error(Millis ts, std::string_view module, std::string_view message) {
    log(ts, LogLevel::kError, module, message);
  }

 private:
  std::ostream* sink_ = nullptr;
  LogLevel min_level_ = LogLevel::kInfo;
  std::mutex mu_;
};

}  // namespace feeder

#endif  // FEEDER_LOG_HPP
