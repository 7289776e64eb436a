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

// Dense product kernels. The OpenMP versions split work over output rows, and
// every output entry is accumulated in ascending inner-index order by a single
// thread, so parallel and serial results are bitwise identical.

#pragma once

#include <cstddef>
#include <span>

namespace clora::kernels {

// c (m x n) = a (m x k) * b (k x n)
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// c (m x n) = aᵀ * b with a stored k x m, b stored k x n
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
// c (m x n) = a * bᵀ with a stored m x k, b stored n x k
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

/// Number of OpenMP threads the kernels will use (1 when built without OpenMP).
int max_threads();

}  // namespace clora::kernels

namespace clora::kernels::serial {

// Naive triple loops. Kept as the reference the parallel kernels are tested
// against and as the baseline in the benchmark.
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

}  // namespace clora::kernels::serial
