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

#ifndef FEEDER_HEX_HPP
#define FEEDER_HEX_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace feeder {

using Bytes = std::vector<std::uint8_t>;

/// Lowercase hex, two characters per byte, no separators.
std::string to_hex(std::span<const std::uint8_t> bytes);

/// Inverse of to_hex; accepts either case. Throws std::invalid_argument.
Bytes from_hex(std::string_view text);

}  // namespace feeder

#endif  // FEEDER_HEX_HPP
