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

// Desk-scale networks with named adapter sites.
//
// Activations are stored feature-major: one column per sample (or per token),
// so a projection is y = W·x exactly as the adapter computes it.
//
// MLP (classification)
//   u      = relu(W_up·x + b_up)          site "mlp_up"   (hidden x input)
//   h      = x + W_down·u                 site "mlp_down" (input x hidden)
//   logits = W_head·h
//
// Transformer (one block, one head)
//   e      = W_embed·token + pos          (classification: token = slice of x)
//          = E[:, id] + pos               (char LM)
//   q,k,v  = W_q·e, W_k·e, W_v·e          sites "query", "key", "value"
//   a      = v·softmax(qᵀk / √d)ᵀ         causal in LM mode
//   h1     = e + a
//   h2     = h1 + W_down·relu(W_up·h1 + b_up)
//   logits = W_head·mean_t(h2)            classification
//          = W_head·h2                    char LM, next-token targets

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clora/adapter.hpp"
#include "clora/grad.hpp"
#include "clora/linalg.hpp"

namespace clora {

enum class ModelKind { kMlp, kTransformer };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

inline constexpr std::string_view kSiteQuery = "query";
inline constexpr std::string_view kSiteKey = "key";
inline constexpr std::string_view kSiteValue = "value";
inline constexpr std::string_view kSiteMlpUp = "mlp_up";
inline constexpr std::string_view kSiteMlpDown = "mlp_down";

struct TinyModelConfig {
  ModelKind kind = ModelKind::kMlp;
  /// Transformer only: character-level next-token prediction instead of
  /// sequence classification.
  bool lm_mode = false;

  std::size_t input_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t num_classes = 2;
  // Transformer shape. In classification mode input_dim must split evenly
  // into seq_len tokens.
  std::size_t vocab_size = 16;
  std::size_t seq_len = 8;
  std::size_t embed_dim = 32;

  /// Empty means every site of the model kind (see available_sites()).
  std::vector<std::string> adapter_targets;
  std::size_t rank = 8;
  double alpha = 16.0;
  double init_std = 0.1;
  double lambda = 1.0;
  /// CLoRA settings; absent or k == 0 means no regularization pair.
  std::optional<RegVariant> reg_variant;
  std::size_t k = 0;
  /// Dropout on the adapter input path during training.
  double dropout = 0.0;

  bool has_reg() const { return reg_variant.has_value() && k > 0; }
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
  /// Sites this model kind exposes.
  std::vector<std::string> available_sites() const;
  /// adapter_targets, or available_sites() when that is empty.
  std::vector<std::string> targets() const;

  friend bool operator==(const TinyModelConfig&, const TinyModelConfig&) = default;
};

/// Classification samples are feature columns with integer labels; LM samples
/// are token sequences of length seq_len + 1 (inputs plus shifted targets).
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::vector<int>> sequences;

  bool is_sequence() const { return !sequences.empty(); }
  std::size_t size() const { return is_sequence() ? sequences.size() : labels.size(); }
  Dataset subset(std::span<const std::size_t> indices) const;
  /// The first `count` samples (or all, if fewer).
  Dataset head(std::size_t count) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

class TinyModel {
 public:
  /// Base weights come from `seed`; adapters and regularization pairs from
  /// independent streams derived from it.
  static TinyModel create(const TinyModelConfig& config, std::uint64_t seed);

  const TinyModelConfig& config() const { return config_; }

  /// Frozen base parameters by name ("mlp_up", "mlp_up.bias", "head", ...).
  const std::map<std::string, Matrix>& base() const { return base_; }
  const std::map<std::string, LoraAdapter>& adapters() const { return adapters_; }
  std::map<std::string, LoraAdapter>& adapters() { return adapters_; }

  /// Rebuilds a model from stored parts (checkpoint loading). Validates that
  /// each adapter's w equals the base matrix of the same name.
  static TinyModel assemble(const TinyModelConfig& config, std::map<std::string, Matrix> base,
                            std::map<std::string, LoraAdapter> adapters);

  /// Checks shapes and that adapter weights still equal the base matrices.
  void check_invariants() const;

 private:
  TinyModelConfig config_;
  std::map<std::string, Matrix> base_;
  std::map<std::string, LoraAdapter> adapters_;
};

/// Trainable factors in canonical order: for each adapter (sorted by name) A then B.
std::vector<Matrix*> trainable_factors(TinyModel& model);
std::vector<const Matrix*> trainable_factors(const TinyModel& model);

/// A model bound onto a Tape. Adapter factors become parameters (in the order
/// of trainable_factors) when `trainable`, constants otherwise.
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const TinyModel& model, bool trainable);

  struct Output {
    Var logits;
    std::vector<int> targets;
    /// Per adapter site: the activations fed into that projection (one column
    /// per vector) and the projection's output.
    std::map<std::string, std::pair<Var, Var>> site_io;
  };

  /// Forward pass. `dropout_rng` enables adapter dropout when config.dropout > 0.
  Output forward(const Dataset& batch, Rng* dropout_rng = nullptr);

  /// Σ over adapters of ‖AᵀP_A‖² + ‖BᵀP_B‖² (zero constant when no adapter has a pair).
  Var reg_loss();
  /// Σ over adapters of ‖A‖² + ‖B‖².
  Var l2_loss();

  /// Parameter handles in the order of trainable_factors().
  const std::vector<Var>& params() const { return params_; }
  Tape& tape() { return tape_; }

 private:
  Var project(const std::string& site, Var x, Output& out, Rng* dropout_rng);
  Var base_var(const std::string& name);

  Tape& tape_;
  const TinyModel& model_;
  std::map<std::string, Var> base_vars_;
  std::map<std::string, std::pair<Var, Var>> factor_vars_;
  std::vector<Var> params_;
};

/// Logits for a batch: classes x batch, or vocab x (batch * seq_len) in LM mode.
Matrix forward_logits(const TinyModel& model, const Dataset& batch);

/// Targets aligned with the columns of forward_logits.
std::vector<int> targets_of(const TinyModelConfig& config, const Dataset& batch);

struct LossParts {
  double task = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

/// Task cross-entropy, Σ clora_reg_loss over adapters with a pair, and
/// task + λ·reg.
LossParts total_loss(const TinyModel& model, const Dataset& batch);

/// Argmax accuracy over all targets in the dataset.
double accuracy(const TinyModel& model, const Dataset& data);

/// Per adapter site, the pre-projection activation vectors seen in a forward
/// pass over `samples`, as columns (one per sample, or per token).
std::map<std::string, Matrix> collect_layer_inputs(const TinyModel& model, const Dataset& samples);

}  // namespace clora
