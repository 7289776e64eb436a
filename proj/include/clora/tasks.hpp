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

// Synthetic task families.
//
//  gaussian_classes  isotropic unit-variance clusters; class means pairwise
//                    `displacement` apart
//  rotated_features  one gaussian_classes task whose feature space is rotated
//                    by t * rotation_deg for task t, in every plane of a fixed
//                    random basis, so consecutive tasks disagree on the
//                    decision boundary
//  char_lm           token chains following a per-task random permutation,
//                    with `noise` probability of a uniformly random token

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "clora/trainer.hpp"

namespace clora {

enum class TaskKind { kGaussianClasses, kRotatedFeatures, kCharLm };

std::string_view to_string(TaskKind k);
TaskKind parse_task_kind(std::string_view s);

struct SyntheticTaskSpec {
  TaskKind kind = TaskKind::kRotatedFeatures;
  std::size_t input_dim = 64;
  std::size_t num_classes = 2;
  std::size_t train_samples = 512;
  std::size_t test_samples = 256;
  std::uint64_t task_seed = 1;
  /// Distance between class means, in units of the noise standard deviation.
  double displacement = 6.0;
  /// Per-task rotation for rotated_features, in degrees.
  double rotation_deg = 30.0;
  /// Dimensions carrying class signal; 0 means all of input_dim. The signal
  /// directions are spread over this many basis planes.
  std::size_t signal_dim = 0;
  // char_lm
  std::size_t vocab_size = 16;
  std::size_t seq_len = 8;
  double noise = 0.1;

  /// Throws ConfigError.
  void validate() const;
  friend bool operator==(const SyntheticTaskSpec&, const SyntheticTaskSpec&) = default;
};

/// Deterministic sequence of `count` train/test pairs. Train and test splits of
/// every task come from disjoint seed streams.
TaskSequence generate_tasks(const SyntheticTaskSpec& spec, std::size_t count);

}  // namespace clora
