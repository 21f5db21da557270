// Copyright 2026 The prefscale Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PREFSCALE_TEXT_IO_HPP_
#define PREFSCALE_TEXT_IO_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prefscale {

// Shortest representation that parses back to the same double.
std::string format_double(double value);

// Whole-token parses; throw ParseError(what, line) on failure.
double parse_double(std::string_view token, std::size_t line = 0);
std::int64_t parse_int(std::string_view token, std::size_t line = 0);

std::vector<std::string_view> split(std::string_view text, char delimiter);
std::vector<std::string_view> split_whitespace(std::string_view text);
std::string_view trim(std::string_view text);

std::string read_file(const std::string& path);
// Writes via a temporary file and rename.
void write_file(const std::string& path, std::string_view contents);

}  // namespace prefscale

#endif  // PREFSCALE_TEXT_IO_HPP_
