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

#include "clora/tasks.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "clora/errors.hpp"

namespace clora {

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kGaussianClasses:
      return "gaussian_classes";
    case TaskKind::kRotatedFeatures:
      return "rotated_features";
    case TaskKind::kCharLm:
      return "char_lm";
  }
  return "gaussian_classes";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "gaussian_classes") return TaskKind::kGaussianClasses;
  if (s == "rotated_features") return TaskKind::kRotatedFeatures;
  if (s == "char_lm") return TaskKind::kCharLm;
  throw ConfigError("unknown task kind '" + std::string(s) + "'");
}

void SyntheticTaskSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("task spec: " + msg); };
  if (train_samples == 0 || test_samples == 0) fail("sample counts must be positive");
  if (kind == TaskKind::kCharLm) {
    if (vocab_size < 2 || seq_len < 1) fail("char_lm needs vocab_size >= 2 and seq_len >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) fail("noise must be in [0, 1]");
    return;
  }
  if (input_dim < 2) fail("input_dim must be >= 2");
  if (num_classes < 2) fail("num_classes must be >= 2");
  const std::size_t sig = signal_dim == 0 ? input_dim : signal_dim;
  if (sig > input_dim) fail("signal_dim exceeds input_dim");
  if (num_classes > 2 && sig < num_classes) fail("signal_dim must be >= num_classes");
  if (!(displacement >= 0.0) || !std::isfinite(displacement)) fail("displacement must be >= 0");
  if (!std::isfinite(rotation_deg)) fail("rotation_deg must be finite");
}

namespace {

// Class means for one task: columns of a d x C matrix, pairwise `displacement` apart.
Matrix class_means(const SyntheticTaskSpec& spec, const Matrix& basis, Rng& rng) {
  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.num_classes;
  const std::size_t sig = spec.signal_dim == 0 ? d : spec.signal_dim;
  Matrix means(d, c);
  // Random orthonormal directions inside the signal subspace.
  const Matrix coeffs = orthonormal_init(sig, c == 2 ? 1 : c, rng);
  const Matrix signal = slice_cols(basis, 0, sig);
  const Matrix dirs = matmul(signal, coeffs);
  if (c == 2) {
    for (std::size_t i = 0; i < d; ++i) {
      means(i, 0) = 0.5 * spec.displacement * dirs(i, 0);
      means(i, 1) = -0.5 * spec.displacement * dirs(i, 0);
    }
  } else {
    const double r = spec.displacement / std::sqrt(2.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < c; ++j) means(i, j) = r * dirs(i, j);
  }
  return means;
}

// Rotates every plane (basis[2i], basis[2i+1]) by `radians`.
Matrix rotate(const Matrix& basis, const Matrix& v, double radians) {
  Matrix coords = matmul_tn(basis, v);
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  for (std::size_t p = 0; p + 1 < coords.rows(); p += 2) {
    for (std::size_t j = 0; j < coords.cols(); ++j) {
      const double x = coords(p, j);
      const double y = coords(p + 1, j);
      coords(p, j) = c * x - s * y;
      coords(p + 1, j) = s * x + c * y;
    }
  }
  return matmul(basis, coords);
}

Dataset sample_classes(const Matrix& means, std::size_t count, Rng& rng) {
  const std::size_t d = means.rows();
  const std::size_t c = means.cols();
  Dataset out;
  out.features = Matrix(d, count);
  out.labels.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t label = j % c;
    out.labels[j] = static_cast<int>(label);
    for (std::size_t i = 0; i < d; ++i) out.features(i, j) = means(i, label) + rng.normal();
  }
  return out;
}

Dataset sample_chains(const std::vector<int>& next, const SyntheticTaskSpec& spec, std::size_t count, Rng& rng) {
  Dataset out;
  out.sequences.resize(count);
  const auto vocab = static_cast<std::uint64_t>(spec.vocab_size);
  for (auto& seq : out.sequences) {
    seq.resize(spec.seq_len + 1);
    seq[0] = static_cast<int>(rng.below(vocab));
    for (std::size_t t = 1; t < seq.size(); ++t) {
      const bool random = rng.uniform() < spec.noise;
      seq[t] = random ? static_cast<int>(rng.below(vocab)) : next[static_cast<std::size_t>(seq[t - 1])];
    }
  }
  return out;
}

}  // namespace

TaskSequence generate_tasks(const SyntheticTaskSpec& spec, std::size_t count) {
  spec.validate();
  if (count < 1) throw ConfigError("generate_tasks: count must be >= 1");
  TaskSequence tasks;
  tasks.reserve(count);

  if (spec.kind == TaskKind::kCharLm) {
    for (std::size_t t = 0; t < count; ++t) {
      Rng perm_rng(derive_seed(spec.task_seed, "chain", t));
      std::vector<int> next(spec.vocab_size);
      std::iota(next.begin(), next.end(), 0);
      for (std::size_t i = next.size(); i > 1; --i) std::swap(next[i - 1], next[perm_rng.below(i)]);
      Rng train_rng(derive_seed(spec.task_seed, "train", t));
      Rng test_rng(derive_seed(spec.task_seed, "test", t));
      tasks.push_back({sample_chains(next, spec, spec.train_samples, train_rng),
                       sample_chains(next, spec, spec.test_samples, test_rng)});
    }
    return tasks;
  }

  Rng basis_rng(derive_seed(spec.task_seed, "basis"));
  const Matrix basis = orthonormal_init(spec.input_dim, spec.input_dim, basis_rng);
  Rng mean_rng(derive_seed(spec.task_seed, "means"));
  const Matrix shared_means = class_means(spec, basis, mean_rng);

  for (std::size_t t = 0; t < count; ++t) {
    Matrix means;
    if (spec.kind == TaskKind::kRotatedFeatures) {
      const double radians = static_cast<double>(t) * spec.rotation_deg * M_PI / 180.0;
      means = radians == 0.0 ? shared_means : rotate(basis, shared_means, radians);
    } else {
      Rng task_mean_rng(derive_seed(spec.task_seed, "means", t));
      means = t == 0 ? shared_means : class_means(spec, basis, task_mean_rng);
    }
    Rng train_rng(derive_seed(spec.task_seed, "train", t));
    Rng test_rng(derive_seed(spec.task_seed, "test", t));
    tasks.push_back(
        {sample_classes(means, spec.train_samples, train_rng), sample_classes(means, spec.test_samples, test_rng)});
  }
  return tasks;
}

}  // namespace clora
