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

// Minimal reverse-mode differentiation over whole matrices.
//
// A Tape records primitive ops in execution order. Each op appends a node whose
// inputs are earlier nodes, so the node list is already topologically sorted
// and backward() is a single reverse sweep. Forward values are never touched
// by backward(); adjoints live in the returned Gradients.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "clora/linalg.hpp"

namespace clora {

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

class Tape;

/// Adjoints produced by Tape::backward. Only nodes that require grad have one.
class Gradients {
 public:
  bool has(Var v) const { return v.id < adjoints_.size() && adjoints_[v.id].has_value(); }
  /// Throws std::out_of_range when the node has no adjoint.
  const Matrix& operator[](Var v) const;

 private:
  friend class Tape;
  std::vector<std::optional<Matrix>> adjoints_;
};

class Tape {
 public:
  enum class Op {
    kConstant,
    kParameter,
    kMatmul,
    kMatmulTN,
    kMatmulNT,
    kTranspose,
    kAdd,
    kSub,
    kScale,
    kMul,
    kAddBias,
    kRelu,
    kSoftmaxRows,
    kSliceCols,
    kConcatCols,
    kMeanCols,
    kSum,
    kSumSquares,
    kCrossEntropy,
  };

  Var constant(Matrix value);
  /// Leaf that receives an adjoint in backward().
  Var parameter(Matrix value);

  Var matmul(Var a, Var b);
  Var matmul_tn(Var a, Var b);  // aᵀ·b
  Var matmul_nt(Var a, Var b);  // a·bᵀ
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  /// Elementwise product.
  Var mul(Var a, Var b);
  /// a (r x c) plus a column vector bias (r x 1) broadcast over columns.
  Var add_bias(Var a, Var bias);
  Var relu(Var a);
  /// Row-wise softmax with max subtraction. With causal=true, entry (i, j) for
  /// j > i is masked to zero probability.
  Var softmax_rows(Var a, bool causal = false);
  Var slice_cols(Var a, std::size_t start, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  /// Column mean, r x 1.
  Var mean_cols(Var a);
  Var sum(Var a);
  /// Squared Frobenius norm.
  Var sum_squares(Var a);
  /// Mean cross-entropy of column-wise softmax(logits) against class labels.
  /// logits is classes x batch.
  Var cross_entropy(Var logits, std::span<const int> labels);

  const Matrix& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  Op op(Var v) const { return node(v).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a 1x1 loss node. Throws std::invalid_argument otherwise.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Op op;
    std::vector<std::size_t> inputs{};
    Matrix value{};
    bool requires_grad = false;
    double scalar = 0.0;
    std::size_t index = 0;
    bool flag = false;
    std::vector<int> labels{};
    Matrix aux{};  // op-specific cache (softmax probabilities for cross-entropy)
  };

  const Node& node(Var v) const;
  Var push(Node n);
  bool any_requires_grad(std::initializer_list<Var> vars) const;

  std::vector<Node> nodes_;
};

/// Central-difference gradient check of a scalar function against a supplied
/// analytic gradient. Per entry the error is |a - n| / max(1e-8, |a| + |n|);
/// returns the maximum.
double finite_difference_check(const std::function<double(const Matrix&)>& f, const Matrix& m,
                               const Matrix& analytic, double h = 1e-5);

/// Same check where the function is built on a Tape from a single parameter
/// and the analytic gradient comes from backward().
double gradcheck(const std::function<Var(Tape&, Var)>& build, const Matrix& m, double h = 1e-5);

}  // namespace clora
