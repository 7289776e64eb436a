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

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace clora {

/// Dense row-major matrix of doubles.
///
/// A default-constructed Matrix is 0x0 and only exists so the type can live in
/// containers; every public operation rejects it.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  /// n x 1 column vector.
  static Matrix column(std::span<const double> values);
  static Matrix diagonal(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> col(std::size_t c) const;
  void set_col(std::size_t c, std::span<const double> values);

  Matrix& operator+=(const Matrix& other);
  Matrix& operator-=(const Matrix& other);
  Matrix& operator*=(double s);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Arithmetic. All throw std::invalid_argument on shape mismatch or empty input.
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
Matrix slice_cols(const Matrix& a, std::size_t start, std::size_t count);

/// Euclidean norm.
double vec_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(const Matrix& a);

/// xoshiro256++ seeded through splitmix64. The stream depends only on the seed.
class Rng {
 public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed);
  static Rng from_state(const State& state);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; one draw consumes two uniforms.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  const State& state() const noexcept { return state_; }

 private:
  Rng() = default;
  State state_{};
};

/// Child seed for a named sub-stream: root -> task -> init -> shuffle.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index);

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double std_dev, Rng& rng);

/// m x k matrix with orthonormal columns: QR of a Gaussian draw with the
/// diagonal of R kept nonnegative, so the result is unique per stream.
Matrix orthonormal_init(std::size_t m, std::size_t k, Rng& rng);

struct SvdResult {
  Matrix u;               // m x p, orthonormal columns
  std::vector<double> s;  // p values, descending
  Matrix v;               // n x p, orthonormal columns
};

/// Thin SVD by one-sided Jacobi. p = min(m, n). Columns belonging to zero
/// singular values are completed to an orthonormal set.
SvdResult svd(const Matrix& m);

/// Largest singular value by power iteration on MᵀM from a fixed-seed start.
/// Throws ConvergenceError (carrying the last estimate) after max_iters.
double spectral_norm(const Matrix& m, double tol = 1e-10, int max_iters = 100000);

}  // namespace clora
