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

#include "clora/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "clora/errors.hpp"

namespace clora {

std::string_view to_string(ModelKind k) { return k == ModelKind::kMlp ? "mlp" : "transformer"; }

ModelKind parse_model_kind(std::string_view s) {
  if (s == "mlp") return ModelKind::kMlp;
  if (s == "transformer") return ModelKind::kTransformer;
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Config

std::vector<std::string> TinyModelConfig::targets() const {
  return adapter_targets.empty() ? available_sites() : adapter_targets;
}

std::vector<std::string> TinyModelConfig::available_sites() const {
  if (kind == ModelKind::kMlp) return {std::string(kSiteMlpUp), std::string(kSiteMlpDown)};
  return {std::string(kSiteQuery), std::string(kSiteKey), std::string(kSiteValue), std::string(kSiteMlpUp),
          std::string(kSiteMlpDown)};
}

void TinyModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (hidden_dim == 0) fail("hidden_dim must be positive");
  if (kind == ModelKind::kMlp) {
    if (lm_mode) fail("lm_mode requires the transformer");
    if (input_dim == 0 || num_classes < 2) fail("mlp needs input_dim >= 1 and num_classes >= 2");
  } else {
    if (embed_dim == 0 || seq_len == 0) fail("transformer needs embed_dim and seq_len >= 1");
    if (lm_mode) {
      if (vocab_size < 2) fail("vocab_size must be >= 2");
    } else {
      if (num_classes < 2) fail("num_classes must be >= 2");
      if (input_dim == 0 || input_dim % seq_len != 0) fail("input_dim must be a positive multiple of seq_len");
    }
  }
  const auto sites = available_sites();
  for (const auto& t : adapter_targets) {
    if (std::find(sites.begin(), sites.end(), t) == sites.end()) fail("unknown adapter target '" + t + "'");
  }
  std::vector<std::string> sorted = adapter_targets;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("duplicate adapter target");
  if (rank == 0) fail("rank must be >= 1");
  if (!(alpha > 0.0)) fail("alpha must be positive");
  if (!(init_std > 0.0)) fail("init_std must be positive");
  if (!(lambda >= 0.0)) fail("lambda must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
}

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  if (indices.empty()) return out;
  if (is_sequence()) {
    out.sequences.reserve(indices.size());
    for (std::size_t i : indices) out.sequences.push_back(sequences.at(i));
    return out;
  }
  out.features = Matrix(features.rows(), indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t src = indices[j];
    if (src >= labels.size()) throw std::out_of_range("Dataset::subset: index out of range");
    for (std::size_t i = 0; i < features.rows(); ++i) out.features(i, j) = features(i, src);
    out.labels.push_back(labels[src]);
  }
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return subset(idx);
}

// ---------------------------------------------------------------------------
// TinyModel

namespace {

double fan_in_std(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

TinyModel TinyModel::create(const TinyModelConfig& config, std::uint64_t seed) {
  config.validate();
  TinyModel m;
  m.config_ = config;
  Rng rng(derive_seed(seed, "base"));
  auto& base = m.base_;

  if (config.kind == ModelKind::kMlp) {
    const std::size_t d = config.input_dim;
    const std::size_t h = config.hidden_dim;
    base["mlp_up"] = gaussian_matrix(h, d, fan_in_std(d), rng);
    base["mlp_up.bias"] = gaussian_matrix(h, 1, 0.1, rng);
    base["mlp_down"] = gaussian_matrix(d, h, fan_in_std(h), rng);
    base["head"] = gaussian_matrix(config.num_classes, d, fan_in_std(d), rng);
  } else {
    const std::size_t e = config.embed_dim;
    const std::size_t h = config.hidden_dim;
    if (config.lm_mode) {
      base["embed"] = gaussian_matrix(e, config.vocab_size, 1.0, rng);
    } else {
      const std::size_t token_dim = config.input_dim / config.seq_len;
      base["embed"] = gaussian_matrix(e, token_dim, fan_in_std(token_dim), rng);
    }
    base["pos"] = gaussian_matrix(e, config.seq_len, 0.5, rng);
    base["query"] = gaussian_matrix(e, e, fan_in_std(e), rng);
    base["key"] = gaussian_matrix(e, e, fan_in_std(e), rng);
    base["value"] = gaussian_matrix(e, e, fan_in_std(e), rng);
    base["mlp_up"] = gaussian_matrix(h, e, fan_in_std(e), rng);
    base["mlp_up.bias"] = gaussian_matrix(h, 1, 0.1, rng);
    base["mlp_down"] = gaussian_matrix(e, h, fan_in_std(h), rng);
    const std::size_t out = config.lm_mode ? config.vocab_size : config.num_classes;
    base["head"] = gaussian_matrix(out, e, fan_in_std(e), rng);
  }

  for (const auto& site : config.targets()) {
    const Matrix& w = base.at(site);
    Rng arng(derive_seed(seed, "adapter/" + site));
    LoraAdapter ad = init_adapter(w, config.rank, config.alpha, config.init_std, arng);
    if (config.has_reg()) {
      Rng rrng(derive_seed(seed, "reg/" + site));
      ad.reg = init_reg(*config.reg_variant, w, config.k, rrng);
    }
    m.adapters_.emplace(site, std::move(ad));
  }
  return m;
}

TinyModel TinyModel::assemble(const TinyModelConfig& config, std::map<std::string, Matrix> base,
                              std::map<std::string, LoraAdapter> adapters) {
  config.validate();
  TinyModel m;
  m.config_ = config;
  m.base_ = std::move(base);
  m.adapters_ = std::move(adapters);
  m.check_invariants();
  return m;
}

void TinyModel::check_invariants() const {
  const auto targets = config_.targets();
  for (const auto& site : targets) {
    auto it = adapters_.find(site);
    if (it == adapters_.end()) throw InvalidState("model: missing adapter for site '" + site + "'");
    validate(it->second);
    auto bit = base_.find(site);
    if (bit == base_.end() || !(bit->second == it->second.w))
      throw InvalidState("model: adapter '" + site + "' weight differs from the frozen base matrix");
  }
  if (adapters_.size() != targets.size())
    throw InvalidState("model: adapters do not match configured targets");
}

std::vector<Matrix*> trainable_factors(TinyModel& model) {
  std::vector<Matrix*> out;
  for (auto& [name, ad] : model.adapters()) {
    out.push_back(&ad.a);
    out.push_back(&ad.b);
  }
  return out;
}

std::vector<const Matrix*> trainable_factors(const TinyModel& model) {
  std::vector<const Matrix*> out;
  for (const auto& [name, ad] : model.adapters()) {
    out.push_back(&ad.a);
    out.push_back(&ad.b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ModelGraph

ModelGraph::ModelGraph(Tape& tape, const TinyModel& model, bool trainable) : tape_(tape), model_(model) {
  for (const auto& [name, ad] : model.adapters()) {
    Var a = trainable ? tape.parameter(ad.a) : tape.constant(ad.a);
    Var b = trainable ? tape.parameter(ad.b) : tape.constant(ad.b);
    factor_vars_.emplace(name, std::make_pair(a, b));
    if (trainable) {
      params_.push_back(a);
      params_.push_back(b);
    }
  }
}

Var ModelGraph::base_var(const std::string& name) {
  auto it = base_vars_.find(name);
  if (it != base_vars_.end()) return it->second;
  Var v = tape_.constant(model_.base().at(name));
  base_vars_.emplace(name, v);
  return v;
}

Var ModelGraph::project(const std::string& site, Var x, Output& out, Rng* dropout_rng) {
  const Var w = base_var(site);
  auto it = model_.adapters().find(site);
  if (it == model_.adapters().end()) return tape_.matmul(w, x);

  const LoraAdapter& ad = it->second;
  const auto [a, b] = factor_vars_.at(site);
  Var adapter_in = x;
  const double p = model_.config().dropout;
  if (dropout_rng != nullptr && p > 0.0) {
    const Matrix& xv = tape_.value(x);
    Matrix mask(xv.rows(), xv.cols());
    for (double& m : mask.data()) m = dropout_rng->uniform() < p ? 0.0 : 1.0 / (1.0 - p);
    adapter_in = tape_.mul(x, tape_.constant(std::move(mask)));
  }
  const Var base_out = tape_.matmul(w, x);
  const Var low = tape_.scale(tape_.matmul(a, tape_.matmul_tn(b, adapter_in)), ad.scaling());
  const Var y = tape_.add(base_out, low);
  out.site_io[site] = {x, y};
  return y;
}

ModelGraph::Output ModelGraph::forward(const Dataset& batch, Rng* dropout_rng) {
  const TinyModelConfig& cfg = model_.config();
  Output out;
  if (batch.size() == 0) throw std::invalid_argument("forward: empty batch");
  out.targets = targets_of(cfg, batch);

  if (cfg.kind == ModelKind::kMlp) {
    if (batch.is_sequence() || batch.features.rows() != cfg.input_dim)
      throw std::invalid_argument("forward: batch features must have input_dim rows");
    const Var x = tape_.constant(batch.features);
    const Var u = tape_.relu(tape_.add_bias(project("mlp_up", x, out, dropout_rng), base_var("mlp_up.bias")));
    const Var h = tape_.add(x, project("mlp_down", u, out, dropout_rng));
    out.logits = tape_.matmul(base_var("head"), h);
    return out;
  }

  // Transformer: embed every token of every sample, columns sample-major.
  const std::size_t n = batch.size();
  const std::size_t t_len = cfg.seq_len;
  const std::size_t e = cfg.embed_dim;
  const Matrix& pos = model_.base().at("pos");
  Matrix embedded(e, n * t_len);
  if (cfg.lm_mode) {
    if (!batch.is_sequence()) throw std::invalid_argument("forward: LM mode needs token sequences");
    const Matrix& table = model_.base().at("embed");
    for (std::size_t s = 0; s < n; ++s) {
      const auto& seq = batch.sequences[s];
      if (seq.size() != t_len + 1) throw std::invalid_argument("forward: sequence length must be seq_len + 1");
      for (std::size_t t = 0; t < t_len; ++t) {
        const int id = seq[t];
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
          throw std::invalid_argument("forward: token id out of range");
        for (std::size_t i = 0; i < e; ++i)
          embedded(i, s * t_len + t) = table(i, static_cast<std::size_t>(id)) + pos(i, t);
      }
    }
  } else {
    if (batch.is_sequence() || batch.features.rows() != cfg.input_dim)
      throw std::invalid_argument("forward: batch features must have input_dim rows");
    const std::size_t token_dim = cfg.input_dim / t_len;
    Matrix tokens(token_dim, n * t_len);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t i = 0; i < token_dim; ++i) tokens(i, s * t_len + t) = batch.features(t * token_dim + i, s);
    Matrix proj = matmul(model_.base().at("embed"), tokens);
    for (std::size_t c = 0; c < n * t_len; ++c)
      for (std::size_t i = 0; i < e; ++i) embedded(i, c) = proj(i, c) + pos(i, c % t_len);
  }
  const Var h0 = tape_.constant(std::move(embedded));

  const Var q = project("query", h0, out, dropout_rng);
  const Var k = project("key", h0, out, dropout_rng);
  const Var v = project("value", h0, out, dropout_rng);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(e));
  std::vector<Var> heads;
  heads.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const Var qs = tape_.slice_cols(q, s * t_len, t_len);
    const Var ks = tape_.slice_cols(k, s * t_len, t_len);
    const Var vs = tape_.slice_cols(v, s * t_len, t_len);
    const Var scores = tape_.scale(tape_.matmul_tn(qs, ks), inv_sqrt);
    const Var probs = tape_.softmax_rows(scores, cfg.lm_mode);
    heads.push_back(tape_.matmul_nt(vs, probs));
  }
  const Var h1 = tape_.add(h0, tape_.concat_cols(heads));
  const Var u = tape_.relu(tape_.add_bias(project("mlp_up", h1, out, dropout_rng), base_var("mlp_up.bias")));
  const Var h2 = tape_.add(h1, project("mlp_down", u, out, dropout_rng));

  if (cfg.lm_mode) {
    out.logits = tape_.matmul(base_var("head"), h2);
    return out;
  }
  std::vector<Var> pooled;
  pooled.reserve(n);
  for (std::size_t s = 0; s < n; ++s) pooled.push_back(tape_.mean_cols(tape_.slice_cols(h2, s * t_len, t_len)));
  out.logits = tape_.matmul(base_var("head"), tape_.concat_cols(pooled));
  return out;
}

Var ModelGraph::reg_loss() {
  std::optional<Var> acc;
  for (const auto& [name, ad] : model_.adapters()) {
    if (!ad.reg) continue;
    const auto [a, b] = factor_vars_.at(name);
    const Var la = tape_.sum_squares(tape_.matmul_tn(a, tape_.constant(ad.reg->p_a)));
    const Var lb = tape_.sum_squares(tape_.matmul_tn(b, tape_.constant(ad.reg->p_b)));
    const Var term = tape_.add(la, lb);
    acc = acc ? tape_.add(*acc, term) : term;
  }
  return acc ? *acc : tape_.constant(Matrix(1, 1, 0.0));
}

Var ModelGraph::l2_loss() {
  std::optional<Var> acc;
  for (const auto& [name, vars] : factor_vars_) {
    const Var term = tape_.add(tape_.sum_squares(vars.first), tape_.sum_squares(vars.second));
    acc = acc ? tape_.add(*acc, term) : term;
  }
  return acc ? *acc : tape_.constant(Matrix(1, 1, 0.0));
}

// ---------------------------------------------------------------------------
// Free functions

std::vector<int> targets_of(const TinyModelConfig& config, const Dataset& batch) {
  if (!config.lm_mode) return batch.labels;
  std::vector<int> targets;
  targets.reserve(batch.size() * config.seq_len);
  for (const auto& seq : batch.sequences) {
    if (seq.size() != config.seq_len + 1) throw std::invalid_argument("targets_of: bad sequence length");
    for (std::size_t t = 0; t < config.seq_len; ++t) targets.push_back(seq[t + 1]);
  }
  return targets;
}

Matrix forward_logits(const TinyModel& model, const Dataset& batch) {
  Tape tape;
  ModelGraph graph(tape, model, false);
  return tape.value(graph.forward(batch).logits);
}

LossParts total_loss(const TinyModel& model, const Dataset& batch) {
  Tape tape;
  ModelGraph graph(tape, model, false);
  const auto out = graph.forward(batch);
  LossParts parts;
  parts.task = tape.value(tape.cross_entropy(out.logits, out.targets))(0, 0);
  for (const auto& [name, ad] : model.adapters())
    if (ad.reg) parts.reg += clora_reg_loss(ad);
  parts.total = parts.task + model.config().lambda * parts.reg;
  return parts;
}

double accuracy(const TinyModel& model, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  const Matrix logits = forward_logits(model, data);
  const std::vector<int> targets = targets_of(model.config(), data);
  std::size_t correct = 0;
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < logits.rows(); ++i)
      if (logits(i, j) > logits(best, j)) best = i;
    if (static_cast<int>(best) == targets[j]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.cols());
}

std::map<std::string, Matrix> collect_layer_inputs(const TinyModel& model, const Dataset& samples) {
  if (samples.size() == 0) throw std::invalid_argument("collect_layer_inputs: empty sample set");
  Tape tape;
  ModelGraph graph(tape, model, false);
  const auto out = graph.forward(samples);
  std::map<std::string, Matrix> inputs;
  for (const auto& [site, io] : out.site_io) inputs.emplace(site, tape.value(io.first));
  return inputs;
}

}  // namespace clora
