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

#include "feeder/log.hpp"

#include <fmt/format.h>

namespace feeder {

std::string_view to_string(LogLevel level) {
  switch (level) {
    case LogLevel::kDebug: return "DEBUG";
    case LogLevel::kInfo: return "INFO";
    case LogLevel::kWarn: return "WARN";
    case LogLevel::kError: return "ERROR";
  }
  return "?";
}

void Logger::log(Millis ts, LogLevel level, std::string_view module, std::string_view message) {
  if (sink_ == nullptr || level < min_level_) return;
  std::lock_guard lock(mu_);
  *sink_ << fmt::format("{} {} {} {}\n", ts, to_string(level), module, message);
}

}  // namespace feeder
