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

#include "clora/adapter.hpp"
#include "clora/errors.hpp"
#include "clora/grad.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clora;

namespace {

LoraAdapter random_adapter(std::mt19937_64& gen, std::size_t m, std::size_t n, std::size_t r, double alpha) {
  LoraAdapter ad;
  ad.w = oracle::random_matrix(gen, m, n);
  ad.a = oracle::random_matrix(gen, m, r);
  ad.b = oracle::random_matrix(gen, n, r);
  ad.rank = r;
  ad.alpha = alpha;
  return ad;
}

// Projection of every column of m onto the orthogonal complement of span(p).
Matrix project_out(const Matrix& m, const Matrix& p) { return sub(m, matmul(p, matmul_tn(p, m))); }

}  // namespace

TEST_CASE("fresh adapter has zero delta and reproduces the base forward") {
  Rng wrng(1);
  const Matrix w = gaussian_matrix(6, 5, 1.0, wrng);
  Rng rng(2);
  const LoraAdapter ad = init_adapter(w, 4, 8.0, 0.02, rng);
  CHECK(ad.b == Matrix(5, 4));
  CHECK(delta(ad) == Matrix(6, 5));
  std::mt19937_64 gen(3);
  for (int i = 0; i < 10; ++i) {
    const Matrix x = oracle::random_matrix(gen, 5, 3);
    CHECK(forward(ad, x) == matmul(w, x));
  }
  CHECK(merge(ad) == w);
}

TEST_CASE("init_adapter is deterministic per seed and validates its arguments") {
  Rng wrng(1);
  const Matrix w = gaussian_matrix(6, 5, 1.0, wrng);
  Rng r1(9), r2(9);
  CHECK(init_adapter(w, 2, 4.0, 0.1, r1).a == init_adapter(w, 2, 4.0, 0.1, r2).a);
  Rng rng(1);
  CHECK_THROWS_AS(init_adapter(w, 0, 1.0, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_adapter(w, 6, 1.0, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_adapter(w, 2, 0.0, 0.1, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_adapter(w, 2, 1.0, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_adapter(Matrix(), 1, 1.0, 0.1, rng), std::invalid_argument);
}

TEST_CASE("delta of unit outer product is a unit matrix") {
  LoraAdapter ad;
  ad.w = Matrix(3, 2);
  ad.a = Matrix::from_rows({{1}, {0}, {0}});
  ad.b = Matrix::from_rows({{1}, {0}});
  ad.rank = 1;
  ad.alpha = 1.0;
  Matrix e11(3, 2);
  e11(0, 0) = 1.0;
  CHECK(delta(ad) == e11);
}

TEST_CASE("delta matches the triple-loop oracle") {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 1, 32);
    const std::size_t n = oracle::random_dim(gen, 1, 32);
    const std::size_t r = oracle::random_dim(gen, 1, std::min(m, n));
    const LoraAdapter ad = random_adapter(gen, m, n, r, 2.0 * r);
    const Matrix expected = oracle::to(oracle::delta(oracle::from(ad.a), oracle::from(ad.b), ad.alpha, r));
    CHECK(max_abs_diff(delta(ad), expected) < 1e-12 * std::max(1.0, max_abs(expected)));
  }
}

TEST_CASE("forward equals the merged path and maps zero to zero") {
  std::mt19937_64 gen(20);
  const LoraAdapter ad = random_adapter(gen, 7, 5, 3, 6.0);
  const Matrix merged = merge(ad);
  for (int i = 0; i < 32; ++i) {
    const Matrix x = oracle::random_matrix(gen, 5, 1);
    CHECK(max_abs_diff(forward(ad, x), matmul(merged, x)) < 1e-10);
  }
  CHECK(forward(ad, Matrix(5, 4)) == Matrix(7, 4));
  CHECK_THROWS_AS(forward(ad, Matrix(4, 1)), std::invalid_argument);
}

TEST_CASE("merge is linear in alpha") {
  std::mt19937_64 gen(21);
  LoraAdapter ad = random_adapter(gen, 4, 6, 2, 3.0);
  const Matrix d1 = sub(merge(ad), ad.w);
  ad.alpha *= 2.0;
  const Matrix d2 = sub(merge(ad), ad.w);
  CHECK(max_abs_diff(d2, scale(d1, 2.0)) < 1e-12);
}

TEST_CASE("orth_loss examples") {
  const Matrix p = Matrix::from_rows({{1, 0}, {0, 1}, {0, 0}, {0, 0}});
  const Matrix m_perp = Matrix::from_rows({{0}, {0}, {1}, {2}});
  CHECK(orth_loss(m_perp, p) == 0.0);
  CHECK(orth_loss(p, p) == 2.0);
  const double c = 1.0 / std::sqrt(2.0);
  const Matrix m = Matrix::from_rows({{1}, {2}});
  const Matrix q = Matrix::from_rows({{c}, {c}});
  CHECK(orth_loss(m, q) == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(orth_loss(m, q) == doctest::Approx(oracle::orth_loss(oracle::from(m), oracle::from(q))).epsilon(1e-14));
  CHECK_THROWS_AS(orth_loss(Matrix(3, 1), Matrix(2, 1)), std::invalid_argument);
}

TEST_CASE("orth_loss_grad examples") {
  Rng rng(4);
  const Matrix p = orthonormal_init(5, 2, rng);
  const Matrix perp = project_out(gaussian_matrix(5, 3, 1.0, rng), p);
  CHECK(max_abs(orth_loss_grad(perp, p)) < 1e-14);
  CHECK(max_abs_diff(orth_loss_grad(p, p), scale(p, 2.0)) < 1e-14);

  std::mt19937_64 gen(23);
  const Matrix m = oracle::random_matrix(gen, 5, 2);
  const Matrix p3 = oracle::random_matrix(gen, 5, 3);
  CHECK(finite_difference_check([&](const Matrix& x) { return orth_loss(x, p3); }, m, orth_loss_grad(m, p3)) < 1e-6);
}

TEST_CASE("property: orth_loss and its gradient against oracles on 50 random shapes") {
  std::mt19937_64 gen(24);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = oracle::random_dim(gen, 1, 32);
    const std::size_t r = oracle::random_dim(gen, 1, 8);
    const std::size_t k = oracle::random_dim(gen, 1, d);
    const Matrix m = oracle::random_matrix(gen, d, r);
    Rng rng(gen());
    const Matrix p = orthonormal_init(d, k, rng);
    const double expected = oracle::orth_loss(oracle::from(m), oracle::from(p));
    CHECK(std::abs(orth_loss(m, p) - expected) <= 1e-10 * std::max(1.0, expected));
    CHECK(finite_difference_check([&](const Matrix& x) { return orth_loss(x, p); }, m, orth_loss_grad(m, p)) < 1e-6);
  }
}

TEST_CASE("clora_reg_loss examples") {
  std::mt19937_64 gen(25);
  Rng wrng(3);
  const Matrix w = gaussian_matrix(6, 4, 1.0, wrng);
  Rng rng(5);
  LoraAdapter ad = init_adapter(w, 2, 4.0, 0.5, rng);
  CHECK_THROWS_AS(clora_reg_loss(ad), InvalidState);
  ad.reg = init_reg(RegVariant::kRandom, w, 3, rng);
  CHECK(clora_reg_loss(ad) == orth_loss(ad.a, ad.reg->p_a));

  ad.a = project_out(ad.a, ad.reg->p_a);
  ad.b = project_out(oracle::random_matrix(gen, 4, 2), ad.reg->p_b);
  CHECK(clora_reg_loss(ad) < 1e-28);

  ad.a = oracle::random_matrix(gen, 6, 2);
  ad.b = oracle::random_matrix(gen, 4, 2);
  const double expected = oracle::orth_loss(oracle::from(ad.a), oracle::from(ad.reg->p_a)) +
                          oracle::orth_loss(oracle::from(ad.b), oracle::from(ad.reg->p_b));
  CHECK(clora_reg_loss(ad) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("init_reg SVD variants on a diagonal weight pick the expected axes") {
  const Matrix w = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  Rng rng(1);
  const RegPair major = init_reg(RegVariant::kSvdMajor, w, 1, rng);
  CHECK(std::abs(major.p_a(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(major.p_b(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  const RegPair minor = init_reg(RegVariant::kSvdMinor, w, 1, rng);
  CHECK(std::abs(minor.p_a(2, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(minor.p_b(2, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(major.variant == RegVariant::kSvdMajor);
  CHECK(minor.k == 1);
}

TEST_CASE("init_reg validates k") {
  Rng rng(1);
  const Matrix w(4, 3, 1.0);
  CHECK_THROWS_AS(init_reg(RegVariant::kRandom, w, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_reg(RegVariant::kRandom, w, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(init_reg(RegVariant::kSvdMinor, w, 4, rng), std::invalid_argument);
}

TEST_CASE("property: every variant yields orthonormal regularization matrices") {
  std::mt19937_64 gen(26);
  for (RegVariant v : {RegVariant::kRandom, RegVariant::kSvdMajor, RegVariant::kSvdMinor}) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t m = oracle::random_dim(gen, 1, 24);
      const std::size_t n = oracle::random_dim(gen, 1, 24);
      const std::size_t k = oracle::random_dim(gen, 1, std::min(m, n));
      Rng rng(gen());
      const RegPair reg = init_reg(v, oracle::random_matrix(gen, m, n), k, rng);
      CHECK(max_abs_diff(matmul_tn(reg.p_a, reg.p_a), Matrix::identity(k)) < 1e-10);
      CHECK(max_abs_diff(matmul_tn(reg.p_b, reg.p_b), Matrix::identity(k)) < 1e-10);
    }
  }
}

TEST_CASE("property: full-size SVD variants span the same subspace") {
  std::mt19937_64 gen(27);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 1, 12);
    const std::size_t n = oracle::random_dim(gen, 1, 12);
    const std::size_t p = std::min(m, n);
    const Matrix w = oracle::random_matrix(gen, m, n);
    Rng rng(1);
    const RegPair major = init_reg(RegVariant::kSvdMajor, w, p, rng);
    const RegPair minor = init_reg(RegVariant::kSvdMinor, w, p, rng);
    // Equal spans iff the projectors agree.
    CHECK(max_abs_diff(matmul_nt(major.p_a, major.p_a), matmul_nt(minor.p_a, minor.p_a)) < 1e-10);
    CHECK(max_abs_diff(matmul_nt(major.p_b, major.p_b), matmul_nt(minor.p_b, minor.p_b)) < 1e-10);
  }
}

TEST_CASE("property: inputs in span(P_B) are annihilated once B is orthogonal to P_B") {
  std::mt19937_64 gen(28);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 2, 24);
    const std::size_t n = oracle::random_dim(gen, 2, 24);
    const std::size_t r = oracle::random_dim(gen, 1, std::min(m, n) - 1);
    const std::size_t k = oracle::random_dim(gen, 1, n - r);
    LoraAdapter ad = random_adapter(gen, m, n, r, 2.0 * r);
    Rng rng(gen());
    ad.reg = init_reg(RegVariant::kRandom, ad.w, std::min(k, std::min(m, n)), rng);
    ad.b = project_out(ad.b, ad.reg->p_b);
    const Matrix x = matmul(ad.reg->p_b, oracle::random_matrix(gen, ad.reg->k, 1));
    const Matrix y = matmul(delta(ad), x);
    CHECK(max_abs(y) < 1e-10 * std::max(1.0, frobenius_norm(x)));
  }
}

TEST_CASE("property: the orthogonal penalty reads back exactly the cross-Gram mass") {
  // With A = P_A·C the penalty is ‖C‖_F², so driving it below eps bounds ‖AᵀP_A‖².
  std::mt19937_64 gen(29);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = oracle::random_dim(gen, 2, 20);
    const std::size_t k = oracle::random_dim(gen, 1, d);
    const std::size_t r = oracle::random_dim(gen, 1, 6);
    Rng rng(gen());
    const Matrix p = orthonormal_init(d, k, rng);
    const Matrix c = oracle::random_matrix(gen, k, r, 1e-4);
    const Matrix a = matmul(p, c);
    const double cross = frobenius_norm(matmul_tn(a, p));
    CHECK(orth_loss(a, p) == doctest::Approx(cross * cross).epsilon(1e-10));
    CHECK(orth_loss(a, p) == doctest::Approx(frobenius_norm(c) * frobenius_norm(c)).epsilon(1e-10));
  }
}

TEST_CASE("RegVariant names round-trip") {
  for (RegVariant v : {RegVariant::kRandom, RegVariant::kSvdMajor, RegVariant::kSvdMinor})
    CHECK(parse_reg_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_reg_variant("qr"), std::invalid_argument);
}
