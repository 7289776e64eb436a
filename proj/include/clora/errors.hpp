// Copyright 2026 The CLoRA Lab Authors
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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace clora {

// Shape or value preconditions use std::invalid_argument directly.

/// Iterative routine ran out of iterations. Carries the last estimate so callers
/// can decide whether it is good enough.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_estimate)
      : std::runtime_error(what), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

/// Operation requires state the object does not have (e.g. no RegPair).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Loss became non-finite during training.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::int64_t step)
      : std::runtime_error(what), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Malformed configuration, task spec, or checkpoint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace clora
