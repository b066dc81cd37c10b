// Copyright 2026 The nlssinit Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nlssinit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or sequence dimensions disagree. `what()` names the offending dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition (non-finite values, too short, empty grid...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A regression problem is numerically ill-conditioned.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

/// A realization or projected model has spectral radius >= 1.
class UnstableModelError : public Error {
 public:
  using Error::Error;
};

/// The state-estimation normal equations could not be factored.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Simulation blew up; `step()` is the 1-based sample index at which the guard tripped.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& msg, std::size_t step) : Error(msg), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Loss became non-finite during an iterative fit.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(const std::string& msg, int iteration) : Error(msg), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Malformed input file. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line) : Error(msg), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Filesystem failure (unreadable input, unwritable output directory).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlssinit
