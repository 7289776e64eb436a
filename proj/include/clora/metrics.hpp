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

// Capacity and forgetting of trained adapters.
//
// Forgetting of an update ΔW on an activation x is ‖ΔW·x‖ / ‖x‖, the relative
// output change the update causes. Capacity is σ_max(ΔW). Both use the
// effective, alpha/r-scaled update. Per-site forgetting is the mean over all
// collected activations of that site; model-level numbers are unweighted means
// over sites.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clora/linalg.hpp"
#include "clora/model.hpp"
#include "clora/trainer.hpp"

namespace clora {

/// ‖ΔW·x‖ / ‖x‖, or nullopt for a zero input (excluded from averages).
std::optional<double> forgetting_of(const Matrix& delta_w, std::span<const double> x);

struct SiteMetrics {
  double capacity = 0.0;
  double forgetting = 0.0;
  /// Same quantities with the frozen W in place of ΔW.
  double reference_capacity = 0.0;
  double reference_forgetting = 0.0;
  /// Inputs that contributed (zero vectors are skipped).
  std::size_t inputs = 0;
};

struct MetricsRecord {
  std::map<std::string, SiteMetrics> per_adapter;
  /// Sites whose collected inputs were all zero; reported but not averaged.
  std::vector<std::string> absent;
  double model_capacity = 0.0;
  double model_forgetting = 0.0;
  double reference_capacity = 0.0;
  double reference_forgetting = 0.0;
};

/// Site metrics from already-collected activations (columns of `inputs`).
SiteMetrics measure_site(const LoraAdapter& adapter, const Matrix& inputs);

/// Collects activations from a forward pass over `samples` and measures every
/// adapter site.
MetricsRecord measure(const TinyModel& model, const Dataset& samples);

/// Number of held-out samples measure() is meant to be fed.
inline constexpr std::size_t kMeasureSamples = 100;

/// One trained configuration to sweep over.
struct SweepSetup {
  TinyModelConfig model;
  TrainConfig train;
  /// Called with each seed; returns the training task and the held-out split
  /// the metrics are collected from.
  std::function<TaskPair(std::uint64_t seed)> make_task;
};

struct SweepRow {
  std::size_t k = 0;
  double capacity = 0.0;
  double forgetting = 0.0;
  /// Per-seed values, in seed order.
  std::vector<double> capacities;
  std::vector<double> forgettings;
};

/// Trains one model per (k, seed) and reports seed means. k = 0 trains plain
/// LoRA; k > 0 trains CLoRA with setup.model's variant (random if unset).
/// Independent runs fan out over up to `threads` workers.
std::vector<SweepRow> sweep_k(const SweepSetup& setup, std::span<const std::size_t> k_values,
                              std::span<const std::uint64_t> seeds, int threads = 1);

/// One trained run, shared by sweep_k and the CLI.
struct RunMetrics {
  MetricsRecord metrics;
  TrainReport report;
};
RunMetrics train_and_measure(const TinyModelConfig& model_config, const TrainConfig& train_config,
                             const TaskPair& task, std::uint64_t seed);

}  // namespace clora
