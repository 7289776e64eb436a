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
#include <optional>
#include <string_view>

#include "clora/linalg.hpp"

namespace clora {

enum class RegVariant { kRandom, kSvdMajor, kSvdMinor };

std::string_view to_string(RegVariant v);
/// Accepts "random", "svd_major", "svd_minor". Throws std::invalid_argument.
RegVariant parse_reg_variant(std::string_view s);

/// Frozen regularization subspaces for one adapter: P_A (m x k) on the output
/// side and P_B (n x k) on the input side, both with orthonormal columns.
struct RegPair {
  Matrix p_a;
  Matrix p_b;
  std::size_t k = 0;
  RegVariant variant = RegVariant::kRandom;
};

/// Low-rank update of a frozen weight: W + (alpha / r) · A·Bᵀ.
///
/// w is m x n, a is m x r, b is n x r.
struct LoraAdapter {
  Matrix w;
  Matrix a;
  Matrix b;
  std::size_t rank = 0;
  double alpha = 1.0;
  std::optional<RegPair> reg;

  double scaling() const { return alpha / static_cast<double>(rank); }
  std::size_t out_dim() const { return w.rows(); }
  std::size_t in_dim() const { return w.cols(); }
};

/// Throws std::invalid_argument when shapes are inconsistent.
void validate(const LoraAdapter& adapter);

/// A ~ N(0, std²), B = 0, so the update starts at exactly zero.
LoraAdapter init_adapter(const Matrix& w, std::size_t rank, double alpha, double std_dev, Rng& rng);

/// Effective update (alpha / r) · A·Bᵀ, m x n.
Matrix delta(const LoraAdapter& adapter);

/// W·x + (alpha / r) · A·(Bᵀ·x) for x of shape n x batch. ΔW is never formed.
Matrix forward(const LoraAdapter& adapter, const Matrix& x);

/// W + delta(adapter).
Matrix merge(const LoraAdapter& adapter);

/// Sum of squared inner products between every trainable column and every
/// regularization column: ‖Mᵀ·P‖_F².
double orth_loss(const Matrix& trainable, const Matrix& p);

/// Gradient of orth_loss with respect to the trainable matrix: 2·P·(Pᵀ·M).
Matrix orth_loss_grad(const Matrix& trainable, const Matrix& p);

/// orth_loss(A, P_A) + orth_loss(B, P_B). Throws InvalidState without a RegPair.
double clora_reg_loss(const LoraAdapter& adapter);

/// Builds the regularization pair for weight w.
///  random    : independent orthonormal draws for P_A and P_B (k <= m, k <= n)
///  svd_major : leading k left/right singular vectors of w (k <= min(m, n))
///  svd_minor : trailing k left/right singular vectors of w
RegPair init_reg(RegVariant variant, const Matrix& w, std::size_t k, Rng& rng);

}  // namespace clora
