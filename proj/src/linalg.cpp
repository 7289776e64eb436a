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

#include "clora/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "clora/errors.hpp"
#include "clora/kernels.hpp"

namespace clora {

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                              "x" + std::to_string(b.cols()));
}

void require_nonempty(const char* op, const Matrix& a) {
  if (a.empty()) throw std::invalid_argument(std::string(op) + ": empty matrix");
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  require_nonempty(op, a);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("Matrix: dimensions must be positive");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("Matrix: dimensions must be positive");
  if (data_.size() != rows * cols) throw std::invalid_argument("Matrix: data length != rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

void Matrix::set_col(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw std::invalid_argument("Matrix::set_col: length != rows");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = values[r];
}

Matrix& Matrix::operator+=(const Matrix& other) {
  require_same_shape("operator+=", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
  require_same_shape("operator-=", *this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// Arithmetic

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_nonempty("matmul", a);
  require_nonempty("matmul", b);
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  kernels::gemm_nn(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require_nonempty("matmul_tn", a);
  require_nonempty("matmul_tn", b);
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  kernels::gemm_tn(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require_nonempty("matmul_nt", a);
  require_nonempty("matmul_nt", b);
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  kernels::gemm_nt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

Matrix add(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c += b;
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  Matrix c = a;
  c -= b;
  return c;
}

Matrix scale(const Matrix& a, double s) {
  require_nonempty("scale", a);
  Matrix c = a;
  c *= s;
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape("hadamard", a, b);
  Matrix c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
  return c;
}

Matrix transpose(const Matrix& a) {
  require_nonempty("transpose", a);
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix slice_cols(const Matrix& a, std::size_t start, std::size_t count) {
  require_nonempty("slice_cols", a);
  if (count == 0 || start + count > a.cols())
    throw std::invalid_argument("slice_cols: range out of bounds");
  Matrix out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = a(i, start + j);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double vec_norm(std::span<const double> v) {
  // Scaled accumulation so huge or tiny entries do not overflow/underflow.
  double scale_v = 0.0;
  for (double x : v) scale_v = std::max(scale_v, std::abs(x));
  if (scale_v == 0.0 || !std::isfinite(scale_v)) return scale_v;
  double acc = 0.0;
  for (double x : v) {
    const double y = x / scale_v;
    acc += y * y;
  }
  return scale_v * std::sqrt(acc);
}

double frobenius_norm(const Matrix& a) { return vec_norm(a.data()); }

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape("max_abs_diff", a, b);
  double m = 0.0;
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data().begin(), a.data().end(), [](double x) { return std::isfinite(x); });
}

// ---------------------------------------------------------------------------
// Rng

Rng::Rng(std::uint64_t seed) {
  std::uint64_t x = seed;
  for (auto& w : state_) w = splitmix64(x);
}

Rng Rng::from_state(const State& state) {
  if (state == State{}) throw std::invalid_argument("Rng::from_state: all-zero state");
  Rng r;
  r.state_ = state;
  return r;
}

std::uint64_t Rng::next_u64() {
  auto& s = state_;
  const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
  const std::uint64_t t = s[1] << 17;
  s[2] ^= s[0];
  s[3] ^= s[1];
  s[1] ^= s[2];
  s[0] ^= s[3];
  s[2] ^= t;
  s[3] = rotl(s[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t x = seed ^ fnv1a(label);
  splitmix64(x);
  return splitmix64(x);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  std::uint64_t x = derive_seed(seed, label) + index * 0x9e3779b97f4a7c15ULL;
  return splitmix64(x);
}

// ---------------------------------------------------------------------------
// Random matrices

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double std_dev, Rng& rng) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("gaussian_matrix: dimensions must be >= 1");
  if (!(std_dev > 0.0) || !std::isfinite(std_dev))
    throw std::invalid_argument("gaussian_matrix: std must be positive");
  Matrix m(rows, cols);
  for (double& x : m.data()) x = std_dev * rng.normal();
  return m;
}

namespace {

// Orthogonalizes column `j` of the transposed basis `qt` (rows are vectors)
// against rows [0, j) with two passes of modified Gram-Schmidt. Returns the
// residual norm before normalization; normalizes when it is positive.
double reorthogonalize(Matrix& qt, std::size_t j) {
  auto v = qt.row(j);
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < j; ++i) {
      auto q = qt.row(i);
      const double c = dot(q, v);
      for (std::size_t t = 0; t < v.size(); ++t) v[t] -= c * q[t];
    }
  }
  const double nrm = vec_norm(v);
  if (nrm > 0.0)
    for (double& x : v) x /= nrm;
  return nrm;
}

// Fills row j of `qt` with a unit vector orthogonal to rows [0, j), picked
// from the standard basis by largest residual.
void complete_basis(Matrix& qt, std::size_t j) {
  const std::size_t dim = qt.cols();
  std::size_t best = 0;
  double best_norm = -1.0;
  for (std::size_t e = 0; e < dim; ++e) {
    double residual = 1.0;
    for (std::size_t i = 0; i < j; ++i) residual -= qt(i, e) * qt(i, e);
    if (residual > best_norm) {
      best_norm = residual;
      best = e;
    }
  }
  auto v = qt.row(j);
  std::fill(v.begin(), v.end(), 0.0);
  v[best] = 1.0;
  reorthogonalize(qt, j);
}

}  // namespace

Matrix orthonormal_init(std::size_t m, std::size_t k, Rng& rng) {
  if (k == 0 || m == 0) throw std::invalid_argument("orthonormal_init: dimensions must be >= 1");
  if (k > m) throw std::invalid_argument("orthonormal_init: k > m, cannot have more than m orthonormal columns");
  // Rows of qt are the columns of the Gaussian draw, consumed in row-major order
  // of the m x k matrix.
  Matrix g = gaussian_matrix(m, k, 1.0, rng);
  Matrix qt = transpose(g);
  for (std::size_t j = 0; j < k; ++j) {
    // Gram-Schmidt keeps R's diagonal (the residual norm) positive.
    if (reorthogonalize(qt, j) < 1e-8) complete_basis(qt, j);
  }
  return transpose(qt);
}

// ---------------------------------------------------------------------------
// SVD

namespace {

constexpr double kJacobiTol = 1e-12;
constexpr int kMaxSweeps = 100;

// m >= n. Works on rows of the transposed copy so column rotations are contiguous.
SvdResult svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix at = transpose(a);        // n x m, row j = column j of a
  Matrix vt = Matrix::identity(n);  // row j = column j of V

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto ap = at.row(p);
        auto aq = at.row(q);
        const double alpha = dot(ap, ap);
        const double beta = dot(aq, aq);
        const double gamma = dot(ap, aq);
        if (gamma == 0.0 || std::abs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double x = ap[i];
          const double y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        auto vp = vt.row(p);
        auto vq = vt.row(q);
        for (std::size_t i = 0; i < n; ++i) {
          const double x = vp[i];
          const double y = vq[i];
          vp[i] = c * x - s * y;
          vq[i] = s * x + c * y;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = vec_norm(at.row(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  Matrix ut(n, m);
  Matrix vt_sorted(n, n);
  SvdResult out;
  out.s.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.s[j] = sigma[src];
    auto vrow = vt_sorted.row(j);
    auto vsrc = vt.row(src);
    std::copy(vsrc.begin(), vsrc.end(), vrow.begin());
    auto urow = ut.row(j);
    auto asrc = at.row(src);
    if (sigma[src] > 0.0)
      for (std::size_t i = 0; i < m; ++i) urow[i] = asrc[i] / sigma[src];
    // Left vectors of tiny singular values are inaccurate; re-orthogonalize
    // and fall back to basis completion when nothing is left.
    if (sigma[src] == 0.0 || reorthogonalize(ut, j) < 0.5) complete_basis(ut, j);
  }
  out.u = transpose(ut);
  out.v = transpose(vt_sorted);
  return out;
}

}  // namespace

SvdResult svd(const Matrix& m) {
  require_nonempty("svd", m);
  if (!all_finite(m)) throw std::invalid_argument("svd: non-finite entries");
  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdResult r = svd_tall(transpose(m));
  std::swap(r.u, r.v);
  return r;
}

double spectral_norm(const Matrix& m, double tol, int max_iters) {
  require_nonempty("spectral_norm", m);
  if (!(tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");
  if (!all_finite(m)) throw std::invalid_argument("spectral_norm: non-finite entries");
  if (max_abs(m) == 0.0) return 0.0;

  Rng rng(0x5bd1e995u);
  Matrix v = gaussian_matrix(m.cols(), 1, 1.0, rng);
  v *= 1.0 / frobenius_norm(v);

  double estimate = 0.0;
  double prev_delta = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iters; ++it) {
    Matrix u = matmul(m, v);
    const double un = frobenius_norm(u);
    if (un == 0.0) {
      // Start vector landed in the null space; nudge it.
      v = gaussian_matrix(m.cols(), 1, 1.0, rng);
      v *= 1.0 / frobenius_norm(v);
      continue;
    }
    u *= 1.0 / un;
    Matrix w = matmul_tn(m, u);
    const double next = frobenius_norm(w);
    v = w;
    v *= 1.0 / next;

    const double delta = std::abs(next - estimate);
    estimate = next;
    if (it > 1) {
      // Linear convergence: remaining error ~ delta * rho / (1 - rho).
      const double rho = delta / prev_delta;
      const bool stalled = delta <= 4.0 * std::numeric_limits<double>::epsilon() * estimate;
      const bool settled = delta <= tol && rho < 1.0 && delta * rho / (1.0 - rho) <= tol;
      if (stalled || settled) return estimate;
    }
    prev_delta = delta;
  }
  throw ConvergenceError("spectral_norm: no convergence in " + std::to_string(max_iters) + " iterations",
                         estimate);
}

}  // namespace clora
