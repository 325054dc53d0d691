// Copyright 2026 The TrajFlow Authors
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

#ifndef TRAJFLOW_ERRORS_HPP_
#define TRAJFLOW_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajflow {

// Malformed data or arguments violating an operation's preconditions.
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

// Invalid user-supplied configuration (scene specs, train configs).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Syntactically broken file. Carries the 1-based line and byte offset when
// known (0 means unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t offset)
      : std::runtime_error(what + " (line " + std::to_string(line) +
                           ", offset " + std::to_string(offset) + ")"),
        line_(line),
        offset_(offset) {}

  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

// File format version not supported by this build.
class VersionError : public std::runtime_error {
 public:
  explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

// Tensor/sequence dimensions do not match a network's contract.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what)
      : std::runtime_error(what) {}
};

// Spline parameters that do not describe a monotone bijection.
class InvalidParams : public std::runtime_error {
 public:
  explicit InvalidParams(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged. Carries the path of the last checkpoint that was
// written successfully, empty if none exists yet.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::string last_checkpoint)
      : std::runtime_error(what),
        last_checkpoint_(std::move(last_checkpoint)) {}

  const std::string& last_checkpoint() const { return last_checkpoint_; }

 private:
  std::string last_checkpoint_;
};

}  // namespace trajflow

#endif  // TRAJFLOW_ERRORS_HPP_
