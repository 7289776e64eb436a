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

#include <omp.h>

#include <random>
#include <vector>

#include "clora/kernels.hpp"
#include "clora/linalg.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace clora;

namespace {

std::vector<double> random_vec(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(gen);
  return v;
}

}  // namespace

TEST_CASE("parallel kernels are bitwise equal to the serial reference") {
  std::mt19937_64 gen(7);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3, 4}) {
    omp_set_num_threads(threads);
    // Small shapes run inline; the larger ones cross the parallel threshold.
    for (auto [m, k, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1}, {3, 5, 2}, {7, 1, 9},
                           {40, 64, 32}, {64, 64, 64}, {129, 33, 65}}) {
      const auto a = random_vec(gen, m * k);
      const auto b_nn = random_vec(gen, k * n);
      const auto b_nt = random_vec(gen, n * k);
      const auto a_tn = random_vec(gen, k * m);
      std::vector<double> par(m * n, -1.0), ser(m * n, -2.0);

      kernels::gemm_nn(a, b_nn, par, m, k, n);
      kernels::serial::gemm_nn(a, b_nn, ser, m, k, n);
      CHECK(par == ser);

      kernels::gemm_tn(a_tn, b_nn, par, m, k, n);
      kernels::serial::gemm_tn(a_tn, b_nn, ser, m, k, n);
      CHECK(par == ser);

      kernels::gemm_nt(a, b_nt, par, m, k, n);
      kernels::serial::gemm_nt(a, b_nt, ser, m, k, n);
      CHECK(par == ser);
    }
  }
  omp_set_num_threads(saved);
}

TEST_CASE("serial reference matches the nested-vector oracle") {
  std::mt19937_64 gen(8);
  const Matrix a = oracle::random_matrix(gen, 5, 4);
  const Matrix b = oracle::random_matrix(gen, 4, 3);
  std::vector<double> c(15);
  kernels::serial::gemm_nn(a.data(), b.data(), c, 5, 4, 3);
  const Matrix expected = oracle::to(oracle::matmul(oracle::from(a), oracle::from(b)));
  CHECK(max_abs_diff(Matrix(5, 3, c), expected) < 1e-12);
}

TEST_CASE("Matrix products route through the kernels") {
  std::mt19937_64 gen(9);
  const Matrix a = oracle::random_matrix(gen, 70, 50);
  const Matrix b = oracle::random_matrix(gen, 50, 60);
  std::vector<double> ser(70 * 60);
  kernels::serial::gemm_nn(a.data(), b.data(), ser, 70, 50, 60);
  CHECK(matmul(a, b) == Matrix(70, 60, ser));
}
