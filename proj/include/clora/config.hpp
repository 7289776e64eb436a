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

// Experiment configuration file.
//
// JSON object with four nested sections and a few top-level keys:
//
//   {
//     "seed": 1,                 root seed; model and shuffle seeds derive from it
//     "num_tasks": 4,            tasks in a continual run
//     "output_dir": "out",
//     "model": { kind, lm_mode, input_dim, hidden_dim, num_classes, vocab_size,
//                seq_len, embed_dim, adapter_targets, rank, alpha, init_std,
//                lambda, reg_variant (null | "random" | "svd_major" |
//                "svd_minor"), k, dropout },
//     "train": { method, lr, batch_size, epochs, warmup_steps, weight_decay,
//                l2_reg_weight, grad_clip },
//     "task":  { kind, input_dim, num_classes, train_samples, test_samples,
//                task_seed, displacement, rotation_deg, signal_dim,
//                vocab_size, seq_len, noise },
//     "sweep": { k_values, seeds }
//   }
//
// Every key is optional and falls back to its default. Unknown keys are
// errors. TrainConfig::seed is not stored: runs derive it from "seed".

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "clora/model.hpp"
#include "clora/tasks.hpp"
#include "clora/trainer.hpp"

namespace clora {

struct ExperimentConfig {
  TinyModelConfig model;
  TrainConfig train;
  SyntheticTaskSpec task;
  std::uint64_t seed = 1;
  std::size_t num_tasks = 4;
  std::vector<std::size_t> sweep_k{4, 8, 16, 32};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3};
  std::string output_dir = "out";

  /// Cross-section consistency (model vs task shapes, method vs k). Throws ConfigError.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Canonical text form: sorted keys, two-space indent, shortest round-trip doubles.
std::string serialize(const ExperimentConfig& config);
/// Throws ConfigError on malformed JSON, wrong types, unknown keys or
/// out-of-range values. Does not call validate().
ExperimentConfig parse_config(std::string_view text);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);

/// FNV-1a of serialize() with output_dir cleared, so relocating results does
/// not invalidate checkpoints.
std::uint64_t config_hash(const ExperimentConfig& config);

/// Train settings for a run: config.train with its seed derived from the root seed.
TrainConfig run_train_config(const ExperimentConfig& config);
/// Seed the run's model is created from.
std::uint64_t run_model_seed(const ExperimentConfig& config);

/// Task of one sweep seed: the configured task family with task_seed derived
/// from (task.task_seed, seed).
TaskPair sweep_task(const SyntheticTaskSpec& spec, std::uint64_t seed);

}  // namespace clora
