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

#include "clora/adapter.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "clora/errors.hpp"

namespace clora {

std::string_view to_string(RegVariant v) {
  switch (v) {
    case RegVariant::kRandom:
      return "random";
    case RegVariant::kSvdMajor:
      return "svd_major";
    case RegVariant::kSvdMinor:
      return "svd_minor";
  }
  return "random";
}

RegVariant parse_reg_variant(std::string_view s) {
  if (s == "random") return RegVariant::kRandom;
  if (s == "svd_major") return RegVariant::kSvdMajor;
  if (s == "svd_minor") return RegVariant::kSvdMinor;
  throw std::invalid_argument("unknown regularization variant '" + std::string(s) + "'");
}

void validate(const LoraAdapter& ad) {
  if (ad.w.empty() || ad.a.empty() || ad.b.empty()) throw std::invalid_argument("adapter: empty factor");
  if (ad.rank == 0 || ad.a.cols() != ad.rank || ad.b.cols() != ad.rank)
    throw std::invalid_argument("adapter: factor columns must equal rank");
  if (ad.a.rows() != ad.w.rows() || ad.b.rows() != ad.w.cols())
    throw std::invalid_argument("adapter: factor rows must match weight shape");
  if (!(ad.alpha > 0.0)) throw std::invalid_argument("adapter: alpha must be positive");
  if (ad.reg) {
    if (ad.reg->p_a.rows() != ad.w.rows() || ad.reg->p_b.rows() != ad.w.cols() ||
        ad.reg->p_a.cols() != ad.reg->k || ad.reg->p_b.cols() != ad.reg->k)
      throw std::invalid_argument("adapter: regularization matrices do not match weight shape");
  }
}

LoraAdapter init_adapter(const Matrix& w, std::size_t rank, double alpha, double std_dev, Rng& rng) {
  if (w.empty()) throw std::invalid_argument("init_adapter: empty weight");
  if (rank == 0 || rank > std::min(w.rows(), w.cols()))
    throw std::invalid_argument("init_adapter: rank must be in [1, min(m, n)]");
  if (!(alpha > 0.0)) throw std::invalid_argument("init_adapter: alpha must be positive");
  LoraAdapter ad;
  ad.w = w;
  ad.a = gaussian_matrix(w.rows(), rank, std_dev, rng);
  ad.b = Matrix(w.cols(), rank);
  ad.rank = rank;
  ad.alpha = alpha;
  return ad;
}

Matrix delta(const LoraAdapter& ad) {
  validate(ad);
  Matrix d = matmul_nt(ad.a, ad.b);
  d *= ad.scaling();
  return d;
}

Matrix forward(const LoraAdapter& ad, const Matrix& x) {
  validate(ad);
  if (x.empty() || x.rows() != ad.in_dim())
    throw std::invalid_argument("adapter forward: input rows must equal weight columns");
  Matrix y = matmul(ad.w, x);
  Matrix low = matmul(ad.a, matmul_tn(ad.b, x));
  low *= ad.scaling();
  y += low;
  return y;
}

Matrix merge(const LoraAdapter& ad) { return add(ad.w, delta(ad)); }

double orth_loss(const Matrix& trainable, const Matrix& p) {
  if (trainable.empty() || p.empty() || trainable.rows() != p.rows())
    throw std::invalid_argument("orth_loss: row mismatch between trainable and regularization matrix");
  const Matrix cross = matmul_tn(trainable, p);
  double acc = 0.0;
  for (double x : cross.data()) acc += x * x;
  return acc;
}

Matrix orth_loss_grad(const Matrix& trainable, const Matrix& p) {
  if (trainable.empty() || p.empty() || trainable.rows() != p.rows())
    throw std::invalid_argument("orth_loss_grad: row mismatch between trainable and regularization matrix");
  Matrix g = matmul(p, matmul_tn(p, trainable));
  g *= 2.0;
  return g;
}

double clora_reg_loss(const LoraAdapter& ad) {
  if (!ad.reg) throw InvalidState("clora_reg_loss: adapter has no regularization pair");
  return orth_loss(ad.a, ad.reg->p_a) + orth_loss(ad.b, ad.reg->p_b);
}

RegPair init_reg(RegVariant variant, const Matrix& w, std::size_t k, Rng& rng) {
  if (w.empty()) throw std::invalid_argument("init_reg: empty weight");
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const std::size_t p = std::min(m, n);
  if (k == 0 || k > p)
    throw std::invalid_argument("init_reg: k must be in [1, min(m, n)] (got " + std::to_string(k) + ")");

  RegPair out;
  out.k = k;
  out.variant = variant;
  if (variant == RegVariant::kRandom) {
    out.p_a = orthonormal_init(m, k, rng);
    out.p_b = orthonormal_init(n, k, rng);
    return out;
  }
  const SvdResult s = svd(w);
  const std::size_t first = variant == RegVariant::kSvdMajor ? 0 : p - k;
  out.p_a = slice_cols(s.u, first, k);
  out.p_b = slice_cols(s.v, first, k);
  return out;
}

}  // namespace clora
