// Copyright 2026 The robustprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ROBUSTPRUNE_ERRORS_HPP_
#define ROBUSTPRUNE_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace robustprune {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by an operation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Filesystem failures: missing files, unwritable directories.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// File payload shorter than its header promises, or counts that disagree.
class LengthError : public Error {
 public:
  using Error::Error;
};

// A training stage produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string stage, std::size_t step, const std::string& why)
      : Error("stage '" + stage + "' diverged at step " + std::to_string(step) +
              ": " + why),
        stage_(std::move(stage)),
        step_(step) {}
  const std::string& stage() const { return stage_; }
  std::size_t step() const { return step_; }

 private:
  std::string stage_;
  std::size_t step_;
};

// Wall-clock budget of a run was exhausted.
class TimeLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace robustprune

#endif  // ROBUSTPRUNE_ERRORS_HPP_
