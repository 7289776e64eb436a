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

#include "clora/metrics.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>

namespace clora {

std::optional<double> forgetting_of(const Matrix& delta_w, std::span<const double> x) {
  if (delta_w.empty() || x.size() != delta_w.cols())
    throw std::invalid_argument("forgetting_of: input length must equal ΔW columns");
  const double xn = vec_norm(x);
  if (xn == 0.0) return std::nullopt;
  std::vector<double> y(delta_w.rows(), 0.0);
  for (std::size_t i = 0; i < delta_w.rows(); ++i) y[i] = dot(delta_w.row(i), x);
  return vec_norm(y) / xn;
}

namespace {

double capacity_of(const Matrix& m) {
  const double scale = std::max(1.0, frobenius_norm(m));
  return spectral_norm(m, 1e-12 * scale);
}

}  // namespace

SiteMetrics measure_site(const LoraAdapter& adapter, const Matrix& inputs) {
  const Matrix dw = delta(adapter);
  if (inputs.rows() != dw.cols()) throw std::invalid_argument("measure_site: input dimension mismatch");
  SiteMetrics out;
  out.capacity = capacity_of(dw);
  out.reference_capacity = capacity_of(adapter.w);
  // Columns as rows: one activation vector per row, contiguous.
  const Matrix xs = transpose(inputs);
  double f_sum = 0.0;
  double ref_sum = 0.0;
  for (std::size_t j = 0; j < xs.rows(); ++j) {
    const auto f = forgetting_of(dw, xs.row(j));
    if (!f) continue;
    f_sum += *f;
    ref_sum += *forgetting_of(adapter.w, xs.row(j));
    ++out.inputs;
  }
  if (out.inputs > 0) {
    out.forgetting = f_sum / static_cast<double>(out.inputs);
    out.reference_forgetting = ref_sum / static_cast<double>(out.inputs);
  }
  return out;
}

MetricsRecord measure(const TinyModel& model, const Dataset& samples) {
  const auto inputs = collect_layer_inputs(model, samples);
  MetricsRecord rec;
  std::size_t present = 0;
  for (const auto& [site, adapter] : model.adapters()) {
    auto it = inputs.find(site);
    SiteMetrics sm = it != inputs.end() ? measure_site(adapter, it->second) : SiteMetrics{};
    if (sm.inputs == 0) {
      rec.absent.push_back(site);
      continue;
    }
    rec.model_capacity += sm.capacity;
    rec.model_forgetting += sm.forgetting;
    rec.reference_capacity += sm.reference_capacity;
    rec.reference_forgetting += sm.reference_forgetting;
    ++present;
    rec.per_adapter.emplace(site, sm);
  }
  if (present > 0) {
    rec.model_capacity /= static_cast<double>(present);
    rec.model_forgetting /= static_cast<double>(present);
    rec.reference_capacity /= static_cast<double>(present);
    rec.reference_forgetting /= static_cast<double>(present);
  }
  return rec;
}

RunMetrics train_and_measure(const TinyModelConfig& model_config, const TrainConfig& train_config,
                             const TaskPair& task, std::uint64_t seed) {
  TinyModel model = TinyModel::create(model_config, derive_seed(seed, "model"));
  TrainConfig tc = train_config;
  tc.seed = derive_seed(seed, "train");
  RunMetrics out;
  out.report = train_task(model, task.train, tc);
  out.metrics = measure(model, task.test.head(kMeasureSamples));
  return out;
}

std::vector<SweepRow> sweep_k(const SweepSetup& setup, std::span<const std::size_t> k_values,
                              std::span<const std::uint64_t> seeds, int threads) {
  if (!std::is_sorted(k_values.begin(), k_values.end()))
    throw std::invalid_argument("sweep_k: k values must be sorted ascending");
  if (seeds.empty()) throw std::invalid_argument("sweep_k: need at least one seed");
  if (!setup.make_task) throw std::invalid_argument("sweep_k: no task factory");

  const std::size_t jobs = k_values.size() * seeds.size();
  std::vector<RunMetrics> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  const auto n_jobs = static_cast<std::int64_t>(jobs);

#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, threads))
  for (std::int64_t job = 0; job < n_jobs; ++job) {
    try {
      const std::size_t k = k_values[static_cast<std::size_t>(job) / seeds.size()];
      const std::uint64_t seed = seeds[static_cast<std::size_t>(job) % seeds.size()];
      TinyModelConfig mc = setup.model;
      TrainConfig tc = setup.train;
      if (k == 0) {
        mc.reg_variant.reset();
        mc.k = 0;
        tc.method = Method::kLora;
      } else {
        if (!mc.reg_variant) mc.reg_variant = RegVariant::kRandom;
        mc.k = k;
        tc.method = Method::kClora;
      }
      const TaskPair task = setup.make_task(seed);
      results[static_cast<std::size_t>(job)] = train_and_measure(mc, tc, task, seed);
    } catch (...) {
      errors[static_cast<std::size_t>(job)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<SweepRow> rows;
  for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
    SweepRow row;
    row.k = k_values[ki];
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const auto& m = results[ki * seeds.size() + si].metrics;
      row.capacities.push_back(m.model_capacity);
      row.forgettings.push_back(m.model_forgetting);
      row.capacity += m.model_capacity;
      row.forgetting += m.model_forgetting;
    }
    row.capacity /= static_cast<double>(seeds.size());
    row.forgetting /= static_cast<double>(seeds.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace clora
