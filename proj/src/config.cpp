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

#include "clora/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "clora/errors.hpp"
#include "json.hpp"

namespace clora {

namespace {

using nlohmann::json;

// Seeds are read through the std::size_t overload.
static_assert(std::is_same_v<std::size_t, std::uint64_t>);

// Reads typed fields out of one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
    if (!obj_.is_object()) fail("", "expected an object");
  }

  void get(const char* key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v->get<std::size_t>();
    }
  }
  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  template <typename T>
  void get(const char* key, std::vector<T>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "expected an array");
      std::vector<T> items;
      for (const json& item : *v) {
        if constexpr (std::is_same_v<T, std::string>) {
          if (!item.is_string()) fail(key, "expected an array of strings");
        } else {
          if (!item.is_number_unsigned()) fail(key, "expected an array of non-negative integers");
        }
        items.push_back(item.get<T>());
      }
      out = std::move(items);
    }
  }
  // Enum-valued field parsed from its name.
  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    if (!find(key)) return;
    get(key, s);
    try {
      out = parse(s);
    } catch (const std::exception& e) {
      fail(key, e.what());
    }
  }
  const json* sub(const char* key) { return find(key); }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) fail(key, "unknown key");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = name_.empty() ? key : (key.empty() ? name_ : name_ + "." + key);
    throw ConfigError("config: " + (where.empty() ? std::string() : where + ": ") + msg);
  }

 private:
  const json* find(const char* key) {
    seen_.emplace_back(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  const json& obj_;
  std::string name_;
  std::vector<std::string> seen_;
};

json model_to_json(const TinyModelConfig& m) {
  json j;
  j["kind"] = std::string(to_string(m.kind));
  j["lm_mode"] = m.lm_mode;
  j["input_dim"] = m.input_dim;
  j["hidden_dim"] = m.hidden_dim;
  j["num_classes"] = m.num_classes;
  j["vocab_size"] = m.vocab_size;
  j["seq_len"] = m.seq_len;
  j["embed_dim"] = m.embed_dim;
  j["adapter_targets"] = m.adapter_targets;
  j["rank"] = m.rank;
  j["alpha"] = m.alpha;
  j["init_std"] = m.init_std;
  j["lambda"] = m.lambda;
  j["reg_variant"] = m.reg_variant ? json(std::string(to_string(*m.reg_variant))) : json(nullptr);
  j["k"] = m.k;
  j["dropout"] = m.dropout;
  return j;
}

void model_from_json(const json& j, TinyModelConfig& m) {
  Section s(j, "model");
  s.get_enum("kind", m.kind, parse_model_kind);
  s.get("lm_mode", m.lm_mode);
  s.get("input_dim", m.input_dim);
  s.get("hidden_dim", m.hidden_dim);
  s.get("num_classes", m.num_classes);
  s.get("vocab_size", m.vocab_size);
  s.get("seq_len", m.seq_len);
  s.get("embed_dim", m.embed_dim);
  s.get("adapter_targets", m.adapter_targets);
  s.get("rank", m.rank);
  s.get("alpha", m.alpha);
  s.get("init_std", m.init_std);
  s.get("lambda", m.lambda);
  if (const json* v = s.sub("reg_variant")) {
    if (v->is_null()) {
      m.reg_variant.reset();
    } else {
      RegVariant variant{};
      s.get_enum("reg_variant", variant, parse_reg_variant);
      m.reg_variant = variant;
    }
  }
  s.get("k", m.k);
  s.get("dropout", m.dropout);
  s.finish();
}

json train_to_json(const TrainConfig& t) {
  json j;
  j["method"] = std::string(to_string(t.method));
  j["lr"] = t.lr;
  j["batch_size"] = t.batch_size;
  j["epochs"] = t.epochs;
  j["warmup_steps"] = t.warmup_steps;
  j["weight_decay"] = t.weight_decay;
  j["l2_reg_weight"] = t.l2_reg_weight;
  j["grad_clip"] = t.grad_clip;
  return j;
}

void train_from_json(const json& j, TrainConfig& t) {
  Section s(j, "train");
  s.get_enum("method", t.method, parse_method);
  s.get("lr", t.lr);
  s.get("batch_size", t.batch_size);
  s.get("epochs", t.epochs);
  s.get("warmup_steps", t.warmup_steps);
  s.get("weight_decay", t.weight_decay);
  s.get("l2_reg_weight", t.l2_reg_weight);
  s.get("grad_clip", t.grad_clip);
  s.finish();
}

json task_to_json(const SyntheticTaskSpec& t) {
  json j;
  j["kind"] = std::string(to_string(t.kind));
  j["input_dim"] = t.input_dim;
  j["num_classes"] = t.num_classes;
  j["train_samples"] = t.train_samples;
  j["test_samples"] = t.test_samples;
  j["task_seed"] = t.task_seed;
  j["displacement"] = t.displacement;
  j["rotation_deg"] = t.rotation_deg;
  j["signal_dim"] = t.signal_dim;
  j["vocab_size"] = t.vocab_size;
  j["seq_len"] = t.seq_len;
  j["noise"] = t.noise;
  return j;
}

void task_from_json(const json& j, SyntheticTaskSpec& t) {
  Section s(j, "task");
  s.get_enum("kind", t.kind, parse_task_kind);
  s.get("input_dim", t.input_dim);
  s.get("num_classes", t.num_classes);
  s.get("train_samples", t.train_samples);
  s.get("test_samples", t.test_samples);
  s.get("task_seed", t.task_seed);
  s.get("displacement", t.displacement);
  s.get("rotation_deg", t.rotation_deg);
  s.get("signal_dim", t.signal_dim);
  s.get("vocab_size", t.vocab_size);
  s.get("seq_len", t.seq_len);
  s.get("noise", t.noise);
  s.finish();
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["num_tasks"] = c.num_tasks;
  j["output_dir"] = c.output_dir;
  j["model"] = model_to_json(c.model);
  j["train"] = train_to_json(c.train);
  j["task"] = task_to_json(c.task);
  j["sweep"] = json{{"k_values", c.sweep_k}, {"seeds", c.sweep_seeds}};
  return j;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  try {
    model.validate();
    train.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  task.validate();
  if (num_tasks < 1) fail("num_tasks must be >= 1");
  if (sweep_seeds.empty()) fail("sweep.seeds must not be empty");
  if (!std::is_sorted(sweep_k.begin(), sweep_k.end())) fail("sweep.k_values must be sorted ascending");
  if (train.method == Method::kClora && !model.has_reg())
    fail("method clora needs model.reg_variant and model.k > 0");

  if (task.kind == TaskKind::kCharLm) {
    if (model.kind != ModelKind::kTransformer || !model.lm_mode)
      fail("task char_lm needs a transformer model with lm_mode");
    if (model.vocab_size != task.vocab_size || model.seq_len != task.seq_len)
      fail("model vocab_size/seq_len must match the char_lm task");
  } else {
    if (model.lm_mode) fail("classification tasks need lm_mode false");
    if (model.input_dim != task.input_dim) fail("model.input_dim must equal task.input_dim");
    if (model.num_classes != task.num_classes) fail("model.num_classes must equal task.num_classes");
  }
}

std::string serialize(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

ExperimentConfig parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig c;
  Section s(j, "");
  s.get("seed", c.seed);
  s.get("num_tasks", c.num_tasks);
  s.get("output_dir", c.output_dir);
  if (const json* v = s.sub("model")) model_from_json(*v, c.model);
  if (const json* v = s.sub("train")) train_from_json(*v, c.train);
  if (const json* v = s.sub("task")) task_from_json(*v, c.task);
  if (const json* v = s.sub("sweep")) {
    Section sweep(*v, "sweep");
    sweep.get("k_values", c.sweep_k);
    sweep.get("seeds", c.sweep_seeds);
    sweep.finish();
  }
  s.finish();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << serialize(config);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.output_dir.clear();
  return fnv1a(serialize(c));
}

TrainConfig run_train_config(const ExperimentConfig& config) {
  TrainConfig t = config.train;
  t.seed = derive_seed(config.seed, "train");
  return t;
}

std::uint64_t run_model_seed(const ExperimentConfig& config) { return derive_seed(config.seed, "model"); }

TaskPair sweep_task(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  SyntheticTaskSpec s = spec;
  s.task_seed = derive_seed(spec.task_seed, "seed", seed);
  return generate_tasks(s, 1).front();
}

}  // namespace clora
