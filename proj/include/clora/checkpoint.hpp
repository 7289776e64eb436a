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

// Binary checkpoint of a model plus its training state.
//
// Layout, all integers unsigned little-endian, doubles as IEEE-754 binary64
// little-endian:
//
//   magic "CLORACKP" (8 bytes), version (u8), config hash (u64)
//   config text       u64 length + UTF-8 bytes (the serialized ExperimentConfig)
//   base matrices     u64 count, then per entry: name, matrix
//   adapters          u64 count, then per entry: name, A, B, rank (u64),
//                     alpha (f64), has_reg (u8) [, variant (u8), k (u64), P_A, P_B]
//   train state       step (u64), epoch (u64), shuffle rng (4 x u64),
//                     dropout rng (4 x u64), loss curve (u64 count + f64s),
//                     Adam m and v (u64 count + matrices each)
//
// A name is u64 length + bytes; a matrix is rows (u64), cols (u64), then the
// row-major values. Adapter W is not stored: it is the base matrix of the same
// name.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "clora/config.hpp"
#include "clora/model.hpp"
#include "clora/trainer.hpp"

namespace clora {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  ExperimentConfig config;
  TinyModel model;
  TrainState state;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);

/// Throws std::runtime_error on truncation, bad magic, unknown version or a
/// stored hash that does not match the stored config. When `expected_hash` is
/// given, a checkpoint written under a different config is rejected too.
Checkpoint read_checkpoint(std::istream& in, std::optional<std::uint64_t> expected_hash = std::nullopt);
Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace clora
