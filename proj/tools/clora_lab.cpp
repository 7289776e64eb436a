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

// clora_lab: command-line front end.
//
//   clora_lab train      [--stop-after-epochs N] [--resume CKPT]
//   clora_lab measure    [--checkpoint CKPT]
//   clora_lab continual
//   clora_lab sweep-k    [--k-values 4,8,16,32] [--seeds 1,2,3]
//   clora_lab report     CSV...
//   clora_lab show-config
//
// Every command accepts --config FILE plus the overrides --seed, --k,
// --lambda, --rank, --method, --variant and --out.

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "clora/checkpoint.hpp"
#include "clora/config.hpp"
#include "clora/errors.hpp"
#include "clora/kernels.hpp"
#include "clora/metrics.hpp"
#include "clora/report.hpp"
#include "clora/tasks.hpp"

namespace fs = std::filesystem;
using namespace clora;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> lambda;
  std::optional<std::size_t> rank;
  std::optional<std::string> method;
  std::optional<std::string> variant;
  std::optional<std::string> out;

  // Whether anything beyond --out shapes the config.
  bool shapes_config() const { return !config_path.empty() || seed || k || lambda || rank || method || variant; }
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--k", o.k, "Regularization subspace size (0 disables)");
  cmd->add_option("--lambda", o.lambda, "Regularization weight");
  cmd->add_option("--rank", o.rank, "Adapter rank");
  cmd->add_option("--method", o.method, "lora | clora | lora_l2");
  cmd->add_option("--variant", o.variant, "random | svd_major | svd_minor");
  cmd->add_option("--out", o.out, "Output directory");
}

ExperimentConfig effective_config(const Overrides& o) {
  ExperimentConfig c = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.variant) c.model.reg_variant = parse_reg_variant(*o.variant);
  if (o.k) {
    c.model.k = *o.k;
    if (*o.k == 0)
      c.model.reg_variant.reset();
    else if (!c.model.reg_variant)
      c.model.reg_variant = RegVariant::kRandom;
  }
  if (o.lambda) c.model.lambda = *o.lambda;
  if (o.rank) c.model.rank = *o.rank;
  if (o.method) c.train.method = parse_method(*o.method);
  if (o.out) c.output_dir = *o.out;
  c.validate();
  return c;
}

fs::path output_path(const ExperimentConfig& c, const char* file) {
  fs::create_directories(c.output_dir);
  return fs::path(c.output_dir) / file;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

RunLabel label_of(const ExperimentConfig& c) {
  RunLabel l;
  l.method = std::string(to_string(c.train.method));
  l.rank = c.model.rank;
  l.seed = c.seed;
  if (c.train.method == Method::kClora) {
    l.k = c.model.k;
    l.lambda = c.model.lambda;
  } else if (c.train.method == Method::kLoraL2) {
    l.lambda = c.train.l2_reg_weight;
  }
  return l;
}

int threads_from_env() {
  const char* env = std::getenv("CLORA_LAB_THREADS");
  if (env == nullptr || *env == '\0') return kernels::max_threads();
  int n = 0;
  const std::string_view s(env);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), n);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || n < 1)
    throw ConfigError("CLORA_LAB_THREADS must be a positive integer, got '" + std::string(s) + "'");
  return n;
}

int cmd_train(const Overrides& o, std::optional<std::size_t> stop_after, const std::string& resume) {
  ExperimentConfig cfg;
  std::optional<Checkpoint> ckpt;
  if (!resume.empty()) {
    std::optional<std::uint64_t> expected;
    if (o.shapes_config()) expected = config_hash(effective_config(o));
    ckpt = load_checkpoint(resume, expected);
    cfg = ckpt->config;
    if (o.out) cfg.output_dir = *o.out;
  } else {
    cfg = effective_config(o);
  }
  const TaskPair task = generate_tasks(cfg.task, 1).front();
  TinyModel model = ckpt ? ckpt->model : TinyModel::create(cfg.model, run_model_seed(cfg));
  Trainer trainer(model, task.train, run_train_config(cfg));
  if (ckpt) trainer.restore(ckpt->state);

  std::size_t ran = 0;
  while (!trainer.done() && (!stop_after || ran < *stop_after)) {
    trainer.run_epoch();
    ++ran;
  }
  const fs::path ckpt_path = output_path(cfg, "checkpoint.bin");
  save_checkpoint(ckpt_path.string(), Checkpoint{cfg, model, trainer.state()});

  std::ofstream loss = open_output(output_path(cfg, "train_loss.csv"));
  loss << "epoch,task_loss\n";
  const auto& curve = trainer.state().loss_curve;
  for (std::size_t e = 0; e < curve.size(); ++e) loss << e + 1 << ',' << format_number(curve[e]) << '\n';

  const TrainReport report = trainer.report();
  std::printf("epochs %zu/%zu  steps %lld  task loss %.6f\n", trainer.state().epoch, cfg.train.epochs,
              static_cast<long long>(report.steps), report.final_task_loss);
  for (const auto& [site, v] : report.final_orth_loss) std::printf("  orth loss %-8s %.6g\n", site.c_str(), v);
  std::printf("checkpoint %s\n", ckpt_path.string().c_str());
  return 0;
}

int cmd_measure(const Overrides& o, const std::string& ckpt_arg) {
  std::string path = ckpt_arg;
  if (path.empty()) {
    const ExperimentConfig cfg = effective_config(o);
    path = (fs::path(cfg.output_dir) / "checkpoint.bin").string();
  }
  Checkpoint ckpt = load_checkpoint(path);
  ExperimentConfig cfg = ckpt.config;
  if (o.out) cfg.output_dir = *o.out;
  const TaskPair task = generate_tasks(cfg.task, 1).front();
  const MetricsRecord rec = measure(ckpt.model, task.test.head(kMeasureSamples));
  for (const auto& site : rec.absent) std::fprintf(stderr, "warning: no inputs reached site '%s'\n", site.c_str());
  const auto rows = measure_rows(rec, label_of(cfg));
  const fs::path out_path = output_path(cfg, "measure.csv");
  std::ofstream out = open_output(out_path);
  write_measure_csv(out, rows);
  write_measure_csv(std::cout, rows);
  return 0;
}

int cmd_continual(const Overrides& o) {
  const ExperimentConfig cfg = effective_config(o);
  const TaskSequence tasks = generate_tasks(cfg.task, cfg.num_tasks);
  TinyModel model = TinyModel::create(cfg.model, run_model_seed(cfg));
  const CLReport report = run_continual(model, tasks, run_train_config(cfg));
  std::ofstream out = open_output(output_path(cfg, "continual.csv"));
  write_continual_csv(out, report);
  for (std::size_t i = 0; i < report.acc.size(); ++i) {
    std::printf("after task %zu:", i + 1);
    for (double a : report.acc[i]) std::printf(" %.3f", a);
    std::printf("\n");
  }
  std::printf("average accuracy %.4f\n", report.average);
  return 0;
}

int cmd_sweep(const Overrides& o, const std::vector<std::size_t>& k_values, const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig cfg = effective_config(o);
  if (!k_values.empty()) cfg.sweep_k = k_values;
  if (!seeds.empty()) cfg.sweep_seeds = seeds;
  cfg.validate();
  SweepSetup setup;
  setup.model = cfg.model;
  setup.train = cfg.train;
  const SyntheticTaskSpec spec = cfg.task;
  setup.make_task = [spec](std::uint64_t seed) { return sweep_task(spec, seed); };
  const auto rows = sweep_k(setup, cfg.sweep_k, cfg.sweep_seeds, threads_from_env());
  std::ofstream out = open_output(output_path(cfg, "sweep_k.csv"));
  write_sweep_csv(out, rows);
  write_sweep_csv(std::cout, rows);
  return 0;
}

int cmd_report(const Overrides& o, const std::vector<std::string>& inputs) {
  const ExperimentConfig cfg = effective_config(o);
  std::vector<MeasureRow> rows;
  for (const auto& path : inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    try {
      auto part = read_measure_csv(in);
      rows.insert(rows.end(), part.begin(), part.end());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path + ": " + e.what());
    }
  }
  const auto summary = summarize(rows);
  std::ofstream out = open_output(output_path(cfg, "summary.csv"));
  write_summary_csv(out, summary);
  std::fputs(format_summary_table(summary).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CLoRA lab: LoRA adapters with orthogonal subspace regularization"};
  app.require_subcommand(1);

  Overrides o;
  auto* train = app.add_subcommand("train", "Train one model and write a checkpoint");
  auto* measure_cmd = app.add_subcommand("measure", "Capacity and forgetting of a checkpoint");
  auto* continual = app.add_subcommand("continual", "Sequential training over num_tasks tasks");
  auto* sweep = app.add_subcommand("sweep-k", "Capacity/forgetting trend over k");
  auto* report = app.add_subcommand("report", "Merge measure CSVs into a summary table");
  auto* show = app.add_subcommand("show-config", "Print the effective config");
  for (auto* cmd : {train, measure_cmd, continual, sweep, report, show}) add_common(cmd, o);

  std::optional<std::size_t> stop_after;
  std::string resume;
  train->add_option("--stop-after-epochs", stop_after, "Checkpoint after this many epochs (0: untrained model)");
  train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  std::string ckpt_path;
  measure_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint (default: <out>/checkpoint.bin)")
      ->check(CLI::ExistingFile);

  std::vector<std::size_t> k_values;
  std::vector<std::uint64_t> seeds;
  sweep->add_option("--k-values", k_values, "Ascending k values (0 = plain LoRA)")->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds to average over")->delimiter(',');

  std::vector<std::string> inputs;
  report->add_option("inputs", inputs, "measure.csv files")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(o, stop_after, resume);
    if (*measure_cmd) return cmd_measure(o, ckpt_path);
    if (*continual) return cmd_continual(o);
    if (*sweep) return cmd_sweep(o, k_values, seeds);
    if (*report) return cmd_report(o, inputs);
    if (*show) {
      std::fputs(serialize(effective_config(o)).c_str(), stdout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "clora_lab: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
