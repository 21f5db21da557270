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

#ifndef PREFSCALE_ERRORS_HPP_
#define PREFSCALE_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prefscale {

// Invalid configuration, dimension mismatch or unknown names.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Violated precondition at run time (stepping a finished episode, empty
// batch, non-finite loss).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not enough data yet; the caller should retry later.
class NotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed persisted file. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what
                                     : "line " + std::to_string(line) + ": " +
                                           what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace prefscale

#endif  // PREFSCALE_ERRORS_HPP_
