// Copyright 2026 The lgcn Authors
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
#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>

namespace lgcn {

// Embedding rows are gathered one node at a time during propagation, so the
// storage order is row-major throughout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using UserId = std::int32_t;
using ItemId = std::int32_t;
using NodeId = std::int32_t;

struct Interaction {
  UserId user = 0;
  ItemId item = 0;

  friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

namespace log {

inline bool& quiet() {
  static bool flag = false;
  return flag;
}

inline void warn(const std::string& msg) {
  if (!quiet()) std::cerr << "warning: " << msg << '\n';
}

inline void info(const std::string& msg) {
  if (!quiet()) std::cerr << msg << '\n';
}

}  // namespace log
}  // namespace lgcn
