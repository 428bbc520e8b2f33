// Copyright 2026 The DDAP Authors
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

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ddap {

// Bad argument to an operation (out-of-range timestep, shape that does not
// tile into blocks, token index outside the prompt, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inputs disagree with the configured model (image size, version tag, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values showed up in a loss, gradient or latent. `where` holds
// the step or flat element index that tripped the check, or -1 if unknown.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, int64_t where = -1)
      : std::runtime_error(what), where_(where) {}

  int64_t where() const { return where_; }

 private:
  int64_t where_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An object was used before it was ready (e.g. an untrained classifier).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ddap
