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

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "clora/linalg.hpp"
#include "clora/model.hpp"

namespace clora {

enum class Method { kLora, kClora, kLoraL2 };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct TrainConfig {
  double lr = 1e-2;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t warmup_steps = 0;
  double weight_decay = 0.0;
  /// LoRA-L2 penalty weight on Σ‖A‖² + ‖B‖²; only used by Method::kLoraL2.
  double l2_reg_weight = 0.0;
  /// Global-norm clipping; 0 disables.
  double grad_clip = 0.0;
  std::uint64_t seed = 0;
  Method method = Method::kLora;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// First and second moments, one pair per trainable tensor.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One AdamW update with decoupled weight decay. `step` is 1-based and drives
/// bias correction. Moments are created on first use.
void adamw_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
                std::int64_t step, double lr, double weight_decay);

/// Linear warmup from 0 to base_lr over warmup_steps, then linear decay to 0 at
/// total_steps.
double lr_at(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps, double base_lr);

struct TrainReport {
  /// Task loss over the full training set after the last epoch.
  double final_task_loss = 0.0;
  /// Mean per-batch task loss of each epoch.
  std::vector<double> loss_curve;
  /// clora_reg_loss per adapter that has a regularization pair.
  std::map<std::string, double> final_orth_loss;
  std::int64_t steps = 0;

  friend bool operator==(const TrainReport&, const TrainReport&) = default;
};

/// Everything needed to continue an interrupted run exactly.
struct TrainState {
  AdamState adam;
  std::int64_t step = 0;
  std::size_t epoch = 0;
  Rng::State shuffle_rng{};
  Rng::State dropout_rng{};
  std::vector<double> loss_curve;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

/// Value of the method's training objective and its gradient for one batch.
struct ObjectiveEval {
  double task = 0.0;
  double penalty = 0.0;
  double total = 0.0;
  std::vector<Matrix> grads;
};

/// Objective for `method`: task loss, plus λ·Σ orth loss (clora) or
/// l2_reg_weight·Σ‖θ‖² (lora_l2). Gradients follow trainable_factors order.
ObjectiveEval evaluate_objective(const TinyModel& model, const Dataset& batch, const TrainConfig& config,
                                 Rng* dropout_rng = nullptr);

/// Minibatch trainer over one dataset. Stops at config.epochs.
class Trainer {
 public:
  Trainer(TinyModel& model, const Dataset& data, TrainConfig config);

  std::int64_t total_steps() const { return total_steps_; }
  bool done() const { return state_.epoch >= config_.epochs; }
  /// Runs one epoch. Throws TrainingError on a non-finite loss.
  void run_epoch();
  /// Runs the remaining epochs.
  TrainReport run();
  TrainReport report() const;

  const TrainState& state() const { return state_; }
  void restore(TrainState state);

 private:
  TinyModel& model_;
  const Dataset& data_;
  TrainConfig config_;
  std::int64_t steps_per_epoch_ = 0;
  std::int64_t total_steps_ = 0;
  TrainState state_;
};

TrainReport train_task(TinyModel& model, const Dataset& data, const TrainConfig& config);

struct TaskPair {
  Dataset train;
  Dataset test;

  friend bool operator==(const TaskPair&, const TaskPair&) = default;
};

using TaskSequence = std::vector<TaskPair>;

struct CLReport {
  /// acc[i][j]: accuracy on test set j after training stage i, j <= i.
  std::vector<std::vector<double>> acc;
  /// Mean of the last row.
  double average = 0.0;
};

/// Trains the shared adapters on each task in order and evaluates every seen
/// test set after each stage. Each stage gets a fresh optimizer and its own
/// shuffle stream derived from config.seed. Requires at least two tasks.
CLReport run_continual(TinyModel& model, const TaskSequence& tasks, const TrainConfig& config);

}  // namespace clora
