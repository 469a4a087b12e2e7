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

#include "feeder/types.hpp"

#include <charconv>

#include <fmt/format.h>

namespace feeder {

TagId::TagId(std::uint16_t country, std::uint64_t national)
    : country_(country), national_(national) {
  if (country > kMaxCountry) {
    throw RangeError("country", fmt::format("country code {} exceeds 10 bits", country));
  }
  if (national > kMaxNational) {
    throw RangeError("national_id", fmt::format("national id {} exceeds 38 bits", national));
  }
}

TagId TagId::from_packed(std::uint64_t bits) {
  if (bits >> 48) throw RangeError("tag", "packed tag exceeds 48 bits");
  return TagId(static_cast<std::uint16_t>(bits >> 38), bits & kMaxNational);
}

std::string TagId::str() const { return fmt::format("{:03}_{:012}", country_, national_); }

TagId TagId::parse(std::string_view text) {
  const auto sep = text.find('_');
  if (sep == std::string_view::npos || sep < 3 || sep > 4 || text.size() - sep - 1 != 12) {
    throw std::invalid_argument(fmt::format("malformed tag '{}'", text));
  }
  std::uint64_t country = 0;
  std::uint64_t national = 0;
  auto parse_digits = [&](std::string_view digits, std::uint64_t& out) {
    for (char c : digits) {
      if (c < '0' || c > '9') throw std::invalid_argument(fmt::format("malformed tag '{}'", text));
    }
    std::from_chars(digits.data(), digits.data() + digits.size(), out);
  };
  parse_digits(text.substr(0, sep), country);
  parse_digits(text.substr(sep + 1), national);
  if (country > kMaxCountry) throw RangeError("country", fmt::format("country code in '{}' exceeds 10 bits", text));
  return TagId(static_cast<std::uint16_t>(country), national);
}

}  // namespace feeder
