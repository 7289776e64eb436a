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
#include <limits>
#include <random>
#include <stdexcept>

#include "clora/errors.hpp"
#include "clora/linalg.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clora;

namespace {

Matrix reconstruct(const SvdResult& r) {
  Matrix us = r.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= r.s[j];
  return matmul_nt(us, r.v);
}

double orthonormality_error(const Matrix& q) {
  return max_abs_diff(matmul_tn(q, q), Matrix::identity(q.cols()));
}

}  // namespace

TEST_CASE("gaussian_matrix is deterministic per seed") {
  Rng r1(7), r2(7);
  CHECK(gaussian_matrix(2, 2, 1.0, r1) == gaussian_matrix(2, 2, 1.0, r2));
}

TEST_CASE("gaussian_matrix sample mean of 1000 draws is near zero") {
  Rng rng(3);
  const Matrix g = gaussian_matrix(1000, 1, 1.0, rng);
  double mean = 0.0;
  for (double v : g.data()) mean += v;
  mean /= 1000.0;
  CHECK(std::abs(mean) < 0.1);
}

TEST_CASE("gaussian_matrix with std 0.02 stays inside a 10 sigma bound") {
  Rng rng(1);
  const Matrix g = gaussian_matrix(3, 4, 0.02, rng);
  for (double v : g.data()) CHECK(std::abs(v) < 0.2);
}

TEST_CASE("gaussian_matrix rejects bad arguments") {
  Rng rng(1);
  CHECK_THROWS_AS(gaussian_matrix(0, 2, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_matrix(2, 0, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_matrix(2, 2, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_matrix(2, 2, -1.0, rng), std::invalid_argument);
}

TEST_CASE("orthonormal_init in one dimension is a unit scalar") {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    Rng rng(seed);
    const Matrix p = orthonormal_init(1, 1, rng);
    CHECK(std::abs(p(0, 0)) == 1.0);
  }
}

TEST_CASE("orthonormal_init 5x3 has orthonormal columns") {
  Rng rng(2);
  CHECK(orthonormality_error(orthonormal_init(5, 3, rng)) < 1e-12);
}

TEST_CASE("orthonormal_init 4x4 has unit determinant") {
  Rng rng(9);
  const Matrix p = orthonormal_init(4, 4, rng);
  CHECK(std::abs(std::abs(oracle::determinant(oracle::from(p))) - 1.0) < 1e-10);
}

TEST_CASE("orthonormal_init rejects k > m") {
  Rng rng(1);
  CHECK_THROWS_AS(orthonormal_init(3, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(orthonormal_init(3, 0, rng), std::invalid_argument);
}

TEST_CASE("property: orthonormal_init is orthonormal for all 1 <= k <= m <= 64") {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 1, 64);
    const std::size_t k = oracle::random_dim(gen, 1, m);
    Rng rng(gen());
    const Matrix p = orthonormal_init(m, k, rng);
    REQUIRE(p.rows() == m);
    REQUIRE(p.cols() == k);
    CHECK(orthonormality_error(p) < 1e-10);
  }
}

TEST_CASE("svd of a diagonal matrix") {
  const SvdResult r = svd(Matrix::from_rows({{3, 0}, {0, 1}}));
  REQUIRE(r.s.size() == 2);
  CHECK(r.s[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(r.s[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd of a rank-one outer product") {
  const double c = 1.0 / std::sqrt(2.0);
  const Matrix u = Matrix::from_rows({{0.6}, {0.8}});
  const Matrix v = Matrix::from_rows({{c}, {c}});
  const SvdResult r = svd(matmul_nt(u, v));
  CHECK(r.s[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(r.s[1]) < 1e-14);
  CHECK(orthonormality_error(r.u) < 1e-10);
  CHECK(orthonormality_error(r.v) < 1e-10);
}

TEST_CASE("svd reconstructs a random 6x4 matrix") {
  Rng rng(5);
  const Matrix m = gaussian_matrix(6, 4, 1.0, rng);
  CHECK(max_abs_diff(reconstruct(svd(m)), m) < 1e-8);
}

TEST_CASE("svd rejects non-finite and empty input") {
  Matrix m(2, 2, 1.0);
  m(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(m), std::invalid_argument);
  CHECK_THROWS_AS(svd(Matrix()), std::invalid_argument);
}

TEST_CASE("property: svd invariants on random shapes up to 64x64") {
  std::mt19937_64 gen(43);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = oracle::random_dim(gen, 1, 64);
    const std::size_t n = oracle::random_dim(gen, 1, 64);
    const Matrix a = oracle::random_matrix(gen, m, n);
    const SvdResult r = svd(a);
    CHECK(orthonormality_error(r.u) < 1e-10);
    CHECK(orthonormality_error(r.v) < 1e-10);
    for (std::size_t i = 0; i < r.s.size(); ++i) {
      CHECK(r.s[i] >= 0.0);
      if (i > 0) CHECK(r.s[i] <= r.s[i - 1]);
    }
    CHECK(max_abs_diff(reconstruct(r), a) < 1e-8 * std::max(1.0, max_abs(a)));
  }
}

TEST_CASE("property: svd singular values match the Gram-matrix eigenvalue oracle") {
  std::mt19937_64 gen(44);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix a = oracle::random_matrix(gen, oracle::random_dim(gen, 1, 12), oracle::random_dim(gen, 1, 12));
    const auto expected = oracle::singular_values(oracle::from(a));
    const auto got = svd(a).s;
    REQUIRE(got.size() == std::min(a.rows(), a.cols()));
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - expected[i]) < 1e-9 * expected[0]);
  }
}

TEST_CASE("spectral_norm examples") {
  CHECK(spectral_norm(Matrix::from_rows({{3, 0}, {0, 1}})) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(spectral_norm(Matrix::from_rows({{0, 2}, {0, 0}})) == doctest::Approx(2.0).epsilon(1e-10));
  Rng rng(11);
  const Matrix m = gaussian_matrix(5, 3, 1.0, rng);
  CHECK(std::abs(spectral_norm(m) - svd(m).s[0]) < 1e-6);
}

TEST_CASE("spectral_norm of the zero matrix is zero") { CHECK(spectral_norm(Matrix(3, 2)) == 0.0); }

TEST_CASE("spectral_norm reports non-convergence with the last estimate") {
  // A single iteration can never confirm convergence.
  const Matrix m = Matrix::from_rows({{2.0, 1.0}, {0.5, 1.0}});
  try {
    spectral_norm(m, 1e-12, 1);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_estimate() > 0.0);
    CHECK(e.last_estimate() <= svd(m).s[0] * (1.0 + 1e-12));
  }
  CHECK_THROWS_AS(spectral_norm(m, 0.0), std::invalid_argument);
}

TEST_CASE("property: spectral_norm agrees with svd on 100 random matrices") {
  std::mt19937_64 gen(45);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_matrix(gen, oracle::random_dim(gen, 1, 32), oracle::random_dim(gen, 1, 32));
    CHECK(std::abs(spectral_norm(a) - svd(a).s[0]) < 1e-6);
  }
}

TEST_CASE("matmul examples") {
  Rng rng(13);
  const Matrix m = gaussian_matrix(3, 4, 1.0, rng);
  CHECK(matmul(Matrix::identity(3), m) == m);
  const std::vector<double> v{3.0, 4.0};
  CHECK(vec_norm(v) == 5.0);

  const Matrix a = gaussian_matrix(3, 4, 1.0, rng);
  const Matrix b = gaussian_matrix(4, 2, 1.0, rng);
  const Matrix c = gaussian_matrix(2, 5, 1.0, rng);
  const Matrix left = matmul(matmul(a, b), c);
  const Matrix right = matmul(a, matmul(b, c));
  const Matrix expected =
      oracle::to(oracle::matmul(oracle::matmul(oracle::from(a), oracle::from(b)), oracle::from(c)));
  CHECK(max_abs_diff(left, right) < 1e-12);
  CHECK(max_abs_diff(left, expected) < 1e-12);
}

TEST_CASE("transposed products match explicit transposes") {
  std::mt19937_64 gen(46);
  const Matrix a = oracle::random_matrix(gen, 4, 3);
  const Matrix b = oracle::random_matrix(gen, 4, 5);
  const Matrix c = oracle::random_matrix(gen, 6, 3);
  CHECK(max_abs_diff(matmul_tn(a, b), oracle::to(oracle::matmul(oracle::transpose(oracle::from(a)),
                                                                   oracle::from(b)))) < 1e-12);
  CHECK(max_abs_diff(matmul_nt(a, c), oracle::to(oracle::matmul(oracle::from(a),
                                                                   oracle::transpose(oracle::from(c))))) < 1e-12);
  CHECK(transpose(transpose(a)) == a);
}

TEST_CASE("elementwise ops and shape errors") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
  CHECK(add(a, b) == Matrix::from_rows({{6, 8}, {10, 12}}));
  CHECK(sub(b, a) == Matrix::from_rows({{4, 4}, {4, 4}}));
  CHECK(scale(a, 2.0) == Matrix::from_rows({{2, 4}, {6, 8}}));
  CHECK(hadamard(a, b) == Matrix::from_rows({{5, 12}, {21, 32}}));
  CHECK(slice_cols(a, 1, 1) == Matrix::from_rows({{2}, {4}}));
  CHECK_THROWS_AS(matmul(a, Matrix(3, 1)), std::invalid_argument);
  CHECK_THROWS_AS(add(a, Matrix(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(slice_cols(a, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(matmul(Matrix(), Matrix()), std::invalid_argument);
}

TEST_CASE("vec_norm does not overflow on large entries") {
  const std::vector<double> v{3e200, 4e200};
  CHECK(vec_norm(v) == doctest::Approx(5e200));
}

TEST_CASE("Rng streams are reproducible and restorable") {
  Rng a(123);
  for (int i = 0; i < 10; ++i) a.next_u64();
  Rng b = Rng::from_state(a.state());
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(c.below(7) < 7u);
  }
}

TEST_CASE("derive_seed separates labels and indices") {
  CHECK(derive_seed(1, "base") == derive_seed(1, "base"));
  CHECK(derive_seed(1, "base") != derive_seed(1, "adapter"));
  CHECK(derive_seed(1, "base") != derive_seed(2, "base"));
  CHECK(derive_seed(1, "stage", 0) != derive_seed(1, "stage", 1));
}
