/*
 * Copyright 2026 The Oversub Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oversub {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input row. `line()` is 1-based and counts the header.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnknownScenario : public Error {
 public:
  explicit UnknownScenario(const std::string& name)
      : Error("unknown scenario preset '" + name + "'") {}
};

class NoFeasiblePm : public Error {
 public:
  using Error::Error;
};

class UnknownVm : public Error {
 public:
  using Error::Error;
};

class ResetError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class MissingSubscriberHistory : public Error {
 public:
  using Error::Error;
};

class NoPlacements : public Error {
 public:
  using Error::Error;
};

class CheckpointVersionMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace oversub
