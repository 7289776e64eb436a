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

#include "clora/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "clora/errors.hpp"
#include "clora/grad.hpp"

namespace clora {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kLora:
      return "lora";
    case Method::kClora:
      return "clora";
    case Method::kLoraL2:
      return "lora_l2";
  }
  return "lora";
}

Method parse_method(std::string_view s) {
  if (s == "lora") return Method::kLora;
  if (s == "clora") return Method::kClora;
  if (s == "lora_l2") return Method::kLoraL2;
  throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train config: lr must be positive");
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(l2_reg_weight >= 0.0)) throw std::invalid_argument("train config: l2_reg_weight must be >= 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train config: weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) throw std::invalid_argument("train config: grad_clip must be >= 0");
}

void adamw_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
                std::int64_t step, double lr, double weight_decay) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: params/grads count mismatch");
  if (step < 1) throw std::invalid_argument("adamw_step: step index is 1-based");
  if (state.m.empty()) {
    for (const Matrix* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adamw_step: state does not match params");

  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t]->data();
    auto g = grads[t].data();
    auto m = state.m[t].data();
    auto v = state.v[t].data();
    if (g.size() != p.size() || m.size() != p.size()) throw std::invalid_argument("adamw_step: shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * weight_decay * p[i];
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
  }
}

double lr_at(std::int64_t step, std::int64_t total_steps, std::int64_t warmup_steps, double base_lr) {
  if (step <= 0 && warmup_steps > 0) return 0.0;
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return base_lr;
  const double remaining = static_cast<double>(std::max<std::int64_t>(0, total_steps - step));
  return base_lr * remaining / static_cast<double>(total_steps - warmup_steps);
}

ObjectiveEval evaluate_objective(const TinyModel& model, const Dataset& batch, const TrainConfig& config,
                                 Rng* dropout_rng) {
  Tape tape;
  ModelGraph graph(tape, model, true);
  const auto out = graph.forward(batch, dropout_rng);
  const Var task = tape.cross_entropy(out.logits, out.targets);
  Var objective = task;
  std::optional<Var> penalty;
  if (config.method == Method::kClora) {
    penalty = graph.reg_loss();
    objective = tape.add(task, tape.scale(*penalty, model.config().lambda));
  } else if (config.method == Method::kLoraL2) {
    penalty = graph.l2_loss();
    objective = tape.add(task, tape.scale(*penalty, config.l2_reg_weight));
  }
  const Gradients grads = tape.backward(objective);

  ObjectiveEval eval;
  eval.task = tape.value(task)(0, 0);
  eval.penalty = penalty ? tape.value(*penalty)(0, 0) : 0.0;
  eval.total = tape.value(objective)(0, 0);
  for (Var p : graph.params()) eval.grads.push_back(grads[p]);
  return eval;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TinyModel& model, const Dataset& data, TrainConfig config)
    : model_(model), data_(data), config_(std::move(config)) {
  config_.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (config_.method == Method::kClora) {
    for (const auto& [name, ad] : model.adapters())
      if (!ad.reg) throw InvalidState("train: clora method needs a regularization pair on adapter '" + name + "'");
  }
  // The last short batch is kept.
  steps_per_epoch_ = static_cast<std::int64_t>((data.size() + config_.batch_size - 1) / config_.batch_size);
  total_steps_ = steps_per_epoch_ * static_cast<std::int64_t>(config_.epochs);
  state_.shuffle_rng = Rng(derive_seed(config_.seed, "shuffle")).state();
  state_.dropout_rng = Rng(derive_seed(config_.seed, "dropout")).state();
}

void Trainer::restore(TrainState state) {
  if (state.epoch > config_.epochs) throw std::invalid_argument("Trainer::restore: epoch beyond schedule");
  state_ = std::move(state);
}

void Trainer::run_epoch() {
  if (done()) return;
  const std::size_t n = data_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle = Rng::from_state(state_.shuffle_rng);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
  state_.shuffle_rng = shuffle.state();
  Rng dropout = Rng::from_state(state_.dropout_rng);
  Rng* dropout_ptr = model_.config().dropout > 0.0 ? &dropout : nullptr;

  std::vector<Matrix*> params = trainable_factors(model_);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start < n; start += config_.batch_size) {
    const std::size_t count = std::min(config_.batch_size, n - start);
    const Dataset batch = data_.subset(std::span<const std::size_t>(order.data() + start, count));
    ObjectiveEval eval = evaluate_objective(model_, batch, config_, dropout_ptr);
    const std::int64_t step = state_.step + 1;
    if (!std::isfinite(eval.total))
      throw TrainingError("training diverged: non-finite loss at step " + std::to_string(step), step);
    if (config_.grad_clip > 0.0) {
      double sq = 0.0;
      for (const Matrix& g : eval.grads)
        for (double x : g.data()) sq += x * x;
      const double norm = std::sqrt(sq);
      if (norm > config_.grad_clip)
        for (Matrix& g : eval.grads) g *= config_.grad_clip / norm;
    }
    const double lr = lr_at(step, total_steps_, static_cast<std::int64_t>(config_.warmup_steps), config_.lr);
    adamw_step(params, eval.grads, state_.adam, step, lr, config_.weight_decay);
    state_.step = step;
    loss_sum += eval.task;
    ++batches;
  }
  state_.dropout_rng = dropout.state();
  state_.loss_curve.push_back(loss_sum / static_cast<double>(batches));
  ++state_.epoch;
}

TrainReport Trainer::run() {
  while (!done()) run_epoch();
  return report();
}

TrainReport Trainer::report() const {
  TrainReport r;
  r.loss_curve = state_.loss_curve;
  r.steps = state_.step;
  r.final_task_loss = total_loss(model_, data_).task;
  for (const auto& [name, ad] : model_.adapters())
    if (ad.reg) r.final_orth_loss[name] = clora_reg_loss(ad);
  return r;
}

TrainReport train_task(TinyModel& model, const Dataset& data, const TrainConfig& config) {
  Trainer trainer(model, data, config);
  return trainer.run();
}

CLReport run_continual(TinyModel& model, const TaskSequence& tasks, const TrainConfig& config) {
  if (tasks.size() < 2) throw std::invalid_argument("run_continual: need at least two tasks");
  CLReport report;
  for (std::size_t stage = 0; stage < tasks.size(); ++stage) {
    TrainConfig stage_config = config;
    stage_config.seed = derive_seed(config.seed, "stage", stage);
    train_task(model, tasks[stage].train, stage_config);
    std::vector<double> row;
    for (std::size_t j = 0; j <= stage; ++j) row.push_back(accuracy(model, tasks[j].test));
    report.acc.push_back(std::move(row));
  }
  const auto& last = report.acc.back();
  report.average = std::accumulate(last.begin(), last.end(), 0.0) / static_cast<double>(last.size());
  return report;
}

}  // namespace clora
