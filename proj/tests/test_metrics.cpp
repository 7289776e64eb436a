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

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "clora/metrics.hpp"
#include "clora/tasks.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clora;

namespace {

std::vector<double> column(const Matrix& m, std::size_t j) {
  std::vector<double> c(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) c[i] = m(i, j);
  return c;
}

TinyModelConfig small_mlp() {
  TinyModelConfig c;
  c.input_dim = 12;
  c.hidden_dim = 12;
  c.num_classes = 2;
  c.rank = 2;
  c.alpha = 4.0;
  return c;
}

SweepSetup small_setup() {
  SweepSetup s;
  s.model = small_mlp();
  s.train.lr = 1e-2;
  s.train.batch_size = 16;
  s.train.epochs = 2;
  SyntheticTaskSpec spec;
  spec.input_dim = 12;
  spec.train_samples = 64;
  spec.test_samples = 64;
  spec.signal_dim = 2;
  s.make_task = [spec](std::uint64_t seed) {
    SyntheticTaskSpec sp = spec;
    sp.task_seed = seed;
    return generate_tasks(sp, 1).front();
  };
  return s;
}

}  // namespace

TEST_CASE("forgetting_of examples") {
  const Matrix eye = Matrix::identity(2);
  const std::vector<double> x = {3.0, 4.0};
  CHECK(forgetting_of(eye, x).value() == 1.0);
  CHECK(forgetting_of(scale(eye, 2.0), std::vector<double>{-1.5, 0.25}).value() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(forgetting_of(Matrix::from_rows({{1, 0}, {0, 0}}), std::vector<double>{0.0, 5.0}).value() == 0.0);
  CHECK_FALSE(forgetting_of(eye, std::vector<double>{0.0, 0.0}).has_value());
  CHECK_THROWS_AS(forgetting_of(eye, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("fresh models measure zero capacity and zero forgetting") {
  std::mt19937_64 gen(60);
  for (ModelKind kind : {ModelKind::kMlp, ModelKind::kTransformer}) {
    TinyModelConfig cfg = small_mlp();
    cfg.kind = kind;
    cfg.seq_len = 3;
    cfg.embed_dim = 6;
    const TinyModel model = TinyModel::create(cfg, 1);
    Dataset d;
    d.features = oracle::random_matrix(gen, 12, 10);
    d.labels.assign(10, 0);
    const MetricsRecord rec = measure(model, d);
    CHECK(rec.per_adapter.size() == cfg.targets().size());
    for (const auto& [site, m] : rec.per_adapter) {
      CHECK(m.capacity == 0.0);
      CHECK(m.forgetting == 0.0);
      CHECK(m.reference_capacity > 0.0);
    }
    CHECK(rec.model_capacity == 0.0);
    CHECK(rec.model_forgetting == 0.0);
  }
}

TEST_CASE("hand-set adapter matches a per-input computation") {
  LoraAdapter ad;
  ad.w = Matrix::identity(3);
  ad.a = Matrix::from_rows({{1, 0}, {0, 2}, {1, 1}});
  ad.b = Matrix::from_rows({{0.5, 0}, {0, 0}, {0, -1}});
  ad.rank = 2;
  ad.alpha = 3.0;
  const Matrix inputs = Matrix::from_rows({{1, 0, 2}, {0, 1, -1}, {0, 0, 3}});
  const SiteMetrics sm = measure_site(ad, inputs);

  const oracle::Mat dw = oracle::delta(oracle::from(ad.a), oracle::from(ad.b), 3.0, 2);
  double expected = 0.0;
  for (std::size_t j = 0; j < 3; ++j) expected += oracle::forgetting(dw, column(inputs, j));
  expected /= 3.0;
  CHECK(sm.inputs == 3);
  CHECK(sm.forgetting == doctest::Approx(expected).epsilon(1e-12));
  CHECK(sm.capacity == doctest::Approx(oracle::singular_values(dw)[0]).epsilon(1e-10));
  CHECK(sm.reference_forgetting == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sm.reference_capacity == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero inputs are skipped and sites without inputs are reported absent") {
  std::mt19937_64 gen(61);
  LoraAdapter ad;
  ad.w = oracle::random_matrix(gen, 3, 3);
  ad.a = oracle::random_matrix(gen, 3, 1);
  ad.b = oracle::random_matrix(gen, 3, 1);
  ad.rank = 1;
  ad.alpha = 1.0;
  Matrix inputs = oracle::random_matrix(gen, 3, 4);
  for (std::size_t i = 0; i < 3; ++i) inputs(i, 1) = 0.0;
  CHECK(measure_site(ad, inputs).inputs == 3);
  CHECK(measure_site(ad, Matrix(3, 2)).inputs == 0);
  CHECK_THROWS_AS(measure_site(ad, Matrix(2, 2)), std::invalid_argument);

  // All-zero features give mlp_up nothing to measure.
  TinyModel model = TinyModel::create(small_mlp(), 2);
  Dataset d;
  d.features = Matrix(12, 5);
  d.labels.assign(5, 1);
  const MetricsRecord rec = measure(model, d);
  CHECK(rec.absent == std::vector<std::string>{"mlp_up"});
  CHECK(rec.per_adapter.count("mlp_down") == 1);
}

TEST_CASE("reference forgetting of an orthogonal W is one") {
  std::mt19937_64 gen(62);
  Rng rng(3);
  LoraAdapter ad;
  ad.w = orthonormal_init(8, 8, rng);
  ad.a = Matrix(8, 2);
  ad.b = Matrix(8, 2);
  ad.rank = 2;
  ad.alpha = 1.0;
  const SiteMetrics sm = measure_site(ad, oracle::random_matrix(gen, 8, 50));
  CHECK(sm.reference_forgetting == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(sm.reference_capacity == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("property: operator-norm bound, input scaling and update scaling over 1000 instances") {
  std::mt19937_64 gen(63);
  std::uniform_real_distribution<double> log_scale(-3.0, 3.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 1, 16);
    const std::size_t n = oracle::random_dim(gen, 1, 16);
    const Matrix dw = oracle::random_matrix(gen, m, n);
    const std::vector<double> x = column(oracle::random_matrix(gen, n, 1), 0);
    const double sigma = spectral_norm(dw, 1e-13);
    const double f = forgetting_of(dw, x).value();
    CHECK(f >= 0.0);
    CHECK(f <= sigma * (1.0 + 1e-8));

    const double c = std::pow(10.0, log_scale(gen)) * (trial % 2 == 0 ? 1.0 : -1.0);
    std::vector<double> cx = x;
    for (double& v : cx) v *= c;
    CHECK(forgetting_of(dw, cx).value() == doctest::Approx(f).epsilon(1e-12));

    const double s = std::pow(10.0, log_scale(gen));
    CHECK(forgetting_of(scale(dw, s), x).value() == doctest::Approx(s * f).epsilon(1e-12));
    CHECK(spectral_norm(scale(dw, s), 1e-13) == doctest::Approx(s * sigma).epsilon(1e-9));
  }
}

TEST_CASE("measure_site capacity matches the brute-force largest singular value") {
  std::mt19937_64 gen(64);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 2, 32);
    const std::size_t n = oracle::random_dim(gen, 2, 32);
    const std::size_t r = oracle::random_dim(gen, 1, std::min(m, n));
    LoraAdapter ad;
    ad.w = oracle::random_matrix(gen, m, n);
    ad.a = oracle::random_matrix(gen, m, r);
    ad.b = oracle::random_matrix(gen, n, r);
    ad.rank = r;
    ad.alpha = 2.0;
    const SiteMetrics sm = measure_site(ad, oracle::random_matrix(gen, n, 3));
    const double expected = oracle::singular_values(oracle::delta(oracle::from(ad.a), oracle::from(ad.b), 2.0, r))[0];
    CHECK(std::abs(sm.capacity - expected) <= 1e-10 * expected);
  }
}

TEST_CASE("sweep_k: k = 0 is plain LoRA, cells are finite and thread count does not matter") {
  const SweepSetup setup = small_setup();
  const std::vector<std::size_t> ks = {0, 4};
  const std::vector<std::uint64_t> seeds = {1, 2};
  const auto rows = sweep_k(setup, ks, seeds, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.capacities.size() == 2);
    CHECK(std::isfinite(r.capacity));
    CHECK(std::isfinite(r.forgetting));
    CHECK(r.capacity >= 0.0);
    CHECK(r.forgetting >= 0.0);
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const RunMetrics plain = train_and_measure(setup.model, setup.train, setup.make_task(seeds[i]), seeds[i]);
    CHECK(rows[0].capacities[i] == plain.metrics.model_capacity);
    CHECK(rows[0].forgettings[i] == plain.metrics.model_forgetting);
  }
  const auto threaded = sweep_k(setup, ks, seeds, 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(threaded[i].capacities == rows[i].capacities);
    CHECK(threaded[i].forgettings == rows[i].forgettings);
  }
}

TEST_CASE("sweep_k validates its inputs") {
  const SweepSetup setup = small_setup();
  const std::vector<std::size_t> unsorted = {8, 4};
  const std::vector<std::uint64_t> seeds = {1};
  CHECK_THROWS_AS(sweep_k(setup, unsorted, seeds), std::invalid_argument);
  const std::vector<std::size_t> ks = {4};
  CHECK_THROWS_AS(sweep_k(setup, ks, std::vector<std::uint64_t>{}), std::invalid_argument);
  SweepSetup no_task = setup;
  no_task.make_task = nullptr;
  CHECK_THROWS_AS(sweep_k(no_task, ks, seeds), std::invalid_argument);
  const std::vector<std::size_t> too_big = {13};
  CHECK_THROWS(sweep_k(setup, too_big, seeds));
}
