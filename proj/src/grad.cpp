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

#include "clora/grad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace clora {

const Matrix& Gradients::operator[](Var v) const {
  if (!has(v)) throw std::out_of_range("Gradients: node " + std::to_string(v.id) + " has no adjoint");
  return *adjoints_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("Tape: unknown node");
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

bool Tape::any_requires_grad(std::initializer_list<Var> vars) const {
  return std::any_of(vars.begin(), vars.end(), [&](Var v) { return node(v).requires_grad; });
}

Var Tape::constant(Matrix value) {
  if (value.empty()) throw std::invalid_argument("Tape::constant: empty matrix");
  return push({.op = Op::kConstant, .inputs = {}, .value = std::move(value)});
}

Var Tape::parameter(Matrix value) {
  if (value.empty()) throw std::invalid_argument("Tape::parameter: empty matrix");
  return push({.op = Op::kParameter, .inputs = {}, .value = std::move(value), .requires_grad = true});
}

Var Tape::matmul(Var a, Var b) {
  return push({.op = Op::kMatmul,
               .inputs = {a.id, b.id},
               .value = clora::matmul(value(a), value(b)),
               .requires_grad = any_requires_grad({a, b})});
}

Var Tape::matmul_tn(Var a, Var b) {
  return push({.op = Op::kMatmulTN,
               .inputs = {a.id, b.id},
               .value = clora::matmul_tn(value(a), value(b)),
               .requires_grad = any_requires_grad({a, b})});
}

Var Tape::matmul_nt(Var a, Var b) {
  return push({.op = Op::kMatmulNT,
               .inputs = {a.id, b.id},
               .value = clora::matmul_nt(value(a), value(b)),
               .requires_grad = any_requires_grad({a, b})});
}

Var Tape::transpose(Var a) {
  return push({.op = Op::kTranspose,
               .inputs = {a.id},
               .value = clora::transpose(value(a)),
               .requires_grad = requires_grad(a)});
}

Var Tape::add(Var a, Var b) {
  return push({.op = Op::kAdd,
               .inputs = {a.id, b.id},
               .value = clora::add(value(a), value(b)),
               .requires_grad = any_requires_grad({a, b})});
}

Var Tape::sub(Var a, Var b) {
  return push({.op = Op::kSub,
               .inputs = {a.id, b.id},
               .value = clora::sub(value(a), value(b)),
               .requires_grad = any_requires_grad({a, b})});
}

Var Tape::scale(Var a, double s) {
  return push({.op = Op::kScale,
               .inputs = {a.id},
               .value = clora::scale(value(a), s),
               .requires_grad = requires_grad(a),
               .scalar = s});
}

Var Tape::mul(Var a, Var b) {
  return push({.op = Op::kMul,
               .inputs = {a.id, b.id},
               .value = clora::hadamard(value(a), value(b)),
               .requires_grad = any_requires_grad({a, b})});
}

Var Tape::add_bias(Var a, Var bias) {
  const Matrix& x = value(a);
  const Matrix& b = value(bias);
  if (b.cols() != 1 || b.rows() != x.rows())
    throw std::invalid_argument("Tape::add_bias: bias must be rows x 1");
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += b(i, 0);
  return push({.op = Op::kAddBias,
               .inputs = {a.id, bias.id},
               .value = std::move(out),
               .requires_grad = any_requires_grad({a, bias})});
}

Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
  return push({.op = Op::kRelu, .inputs = {a.id}, .value = std::move(out), .requires_grad = requires_grad(a)});
}

Var Tape::softmax_rows(Var a, bool causal) {
  const Matrix& x = value(a);
  if (causal && x.rows() != x.cols())
    throw std::invalid_argument("Tape::softmax_rows: causal mask needs a square matrix");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const std::size_t limit = causal ? i + 1 : x.cols();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < limit; ++j) {
      out(i, j) = std::exp(x(i, j) - mx);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < limit; ++j) out(i, j) /= total;
  }
  return push({.op = Op::kSoftmaxRows,
               .inputs = {a.id},
               .value = std::move(out),
               .requires_grad = requires_grad(a),
               .flag = causal});
}

Var Tape::slice_cols(Var a, std::size_t start, std::size_t count) {
  return push({.op = Op::kSliceCols,
               .inputs = {a.id},
               .value = clora::slice_cols(value(a), start, count),
               .requires_grad = requires_grad(a),
               .index = start});
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::concat_cols: no inputs");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  Node n{.op = Op::kConcatCols};
  for (Var p : parts) {
    if (value(p).rows() != rows) throw std::invalid_argument("Tape::concat_cols: row mismatch");
    cols += value(p).cols();
    n.inputs.push_back(p.id);
    n.requires_grad = n.requires_grad || requires_grad(p);
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& x = value(p);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < x.cols(); ++j) out(i, offset + j) = x(i, j);
    offset += x.cols();
  }
  n.value = std::move(out);
  return push(std::move(n));
}

Var Tape::mean_cols(Var a) {
  const Matrix& x = value(a);
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j);
    out(i, 0) = acc / static_cast<double>(x.cols());
  }
  return push({.op = Op::kMeanCols, .inputs = {a.id}, .value = std::move(out), .requires_grad = requires_grad(a)});
}

Var Tape::sum(Var a) {
  double acc = 0.0;
  for (double x : value(a).data()) acc += x;
  return push({.op = Op::kSum, .inputs = {a.id}, .value = Matrix(1, 1, acc), .requires_grad = requires_grad(a)});
}

Var Tape::sum_squares(Var a) {
  double acc = 0.0;
  for (double x : value(a).data()) acc += x * x;
  return push(
      {.op = Op::kSumSquares, .inputs = {a.id}, .value = Matrix(1, 1, acc), .requires_grad = requires_grad(a)});
}

Var Tape::cross_entropy(Var logits, std::span<const int> labels) {
  const Matrix& z = value(logits);
  if (labels.size() != z.cols())
    throw std::invalid_argument("Tape::cross_entropy: one label per column required");
  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t j = 0; j < z.cols(); ++j) {
    const int label = labels[j];
    if (label < 0 || static_cast<std::size_t>(label) >= z.rows())
      throw std::invalid_argument("Tape::cross_entropy: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < z.rows(); ++i) mx = std::max(mx, z(i, j));
    double total = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) total += std::exp(z(i, j) - mx);
    const double log_total = std::log(total);
    for (std::size_t i = 0; i < z.rows(); ++i) probs(i, j) = std::exp(z(i, j) - mx - log_total);
    loss -= z(static_cast<std::size_t>(label), j) - mx - log_total;
  }
  loss /= static_cast<double>(z.cols());
  return push({.op = Op::kCrossEntropy,
               .inputs = {logits.id},
               .value = Matrix(1, 1, loss),
               .requires_grad = requires_grad(logits),
               .labels = std::vector<int>(labels.begin(), labels.end()),
               .aux = std::move(probs)});
}

Gradients Tape::backward(Var loss) const {
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("Tape::backward: loss must be 1x1");

  Gradients g;
  auto& adj = g.adjoints_;
  adj.resize(nodes_.size());
  adj[loss.id] = Matrix(1, 1, 1.0);

  auto accumulate = [&](std::size_t id, const Matrix& d) {
    if (!nodes_[id].requires_grad) return;
    if (adj[id]) {
      *adj[id] += d;
    } else {
      adj[id] = d;
    }
  };

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || !adj[id]) continue;
    const Matrix& d = *adj[id];
    const auto& in = n.inputs;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatmul:
        if (nodes_[in[0]].requires_grad) accumulate(in[0], clora::matmul_nt(d, nodes_[in[1]].value));
        if (nodes_[in[1]].requires_grad) accumulate(in[1], clora::matmul_tn(nodes_[in[0]].value, d));
        break;
      case Op::kMatmulTN:
        if (nodes_[in[0]].requires_grad) accumulate(in[0], clora::matmul_nt(nodes_[in[1]].value, d));
        if (nodes_[in[1]].requires_grad) accumulate(in[1], clora::matmul(nodes_[in[0]].value, d));
        break;
      case Op::kMatmulNT:
        if (nodes_[in[0]].requires_grad) accumulate(in[0], clora::matmul(d, nodes_[in[1]].value));
        if (nodes_[in[1]].requires_grad) accumulate(in[1], clora::matmul_tn(d, nodes_[in[0]].value));
        break;
      case Op::kTranspose:
        accumulate(in[0], clora::transpose(d));
        break;
      case Op::kAdd:
        accumulate(in[0], d);
        accumulate(in[1], d);
        break;
      case Op::kSub:
        accumulate(in[0], d);
        if (nodes_[in[1]].requires_grad) accumulate(in[1], clora::scale(d, -1.0));
        break;
      case Op::kScale:
        accumulate(in[0], clora::scale(d, n.scalar));
        break;
      case Op::kMul:
        if (nodes_[in[0]].requires_grad) accumulate(in[0], clora::hadamard(d, nodes_[in[1]].value));
        if (nodes_[in[1]].requires_grad) accumulate(in[1], clora::hadamard(d, nodes_[in[0]].value));
        break;
      case Op::kAddBias: {
        accumulate(in[0], d);
        if (nodes_[in[1]].requires_grad) {
          Matrix db(d.rows(), 1);
          for (std::size_t i = 0; i < d.rows(); ++i)
            for (std::size_t j = 0; j < d.cols(); ++j) db(i, 0) += d(i, j);
          accumulate(in[1], db);
        }
        break;
      }
      case Op::kRelu: {
        Matrix dx = d;
        auto x = nodes_[in[0]].value.data();
        auto dd = dx.data();
        for (std::size_t i = 0; i < dd.size(); ++i)
          if (!(x[i] > 0.0)) dd[i] = 0.0;
        accumulate(in[0], dx);
        break;
      }
      case Op::kSoftmaxRows: {
        const Matrix& y = n.value;
        Matrix dx(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double inner = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) inner += d(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (d(i, j) - inner);
        }
        accumulate(in[0], dx);
        break;
      }
      case Op::kSliceCols: {
        const Matrix& x = nodes_[in[0]].value;
        Matrix dx(x.rows(), x.cols());
        for (std::size_t i = 0; i < d.rows(); ++i)
          for (std::size_t j = 0; j < d.cols(); ++j) dx(i, n.index + j) = d(i, j);
        accumulate(in[0], dx);
        break;
      }
      case Op::kConcatCols: {
        std::size_t offset = 0;
        for (std::size_t p : in) {
          const std::size_t c = nodes_[p].value.cols();
          if (nodes_[p].requires_grad) accumulate(p, clora::slice_cols(d, offset, c));
          offset += c;
        }
        break;
      }
      case Op::kMeanCols: {
        const Matrix& x = nodes_[in[0]].value;
        Matrix dx(x.rows(), x.cols());
        const double inv = 1.0 / static_cast<double>(x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = d(i, 0) * inv;
        accumulate(in[0], dx);
        break;
      }
      case Op::kSum: {
        const Matrix& x = nodes_[in[0]].value;
        accumulate(in[0], Matrix(x.rows(), x.cols(), d(0, 0)));
        break;
      }
      case Op::kSumSquares:
        accumulate(in[0], clora::scale(nodes_[in[0]].value, 2.0 * d(0, 0)));
        break;
      case Op::kCrossEntropy: {
        Matrix dz = n.aux;
        const double w = d(0, 0) / static_cast<double>(dz.cols());
        for (std::size_t j = 0; j < dz.cols(); ++j) dz(static_cast<std::size_t>(n.labels[j]), j) -= 1.0;
        dz *= w;
        accumulate(in[0], dz);
        break;
      }
    }
  }

  // Only leaves that asked for gradients keep their adjoints; parameters
  // unreachable from the loss get an explicit zero.
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op == Op::kParameter) {
      if (!adj[id]) adj[id] = Matrix(nodes_[id].value.rows(), nodes_[id].value.cols());
    } else {
      adj[id].reset();
    }
  }
  return g;
}

double finite_difference_check(const std::function<double(const Matrix&)>& f, const Matrix& m,
                               const Matrix& analytic, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_difference_check: h must be positive");
  if (analytic.rows() != m.rows() || analytic.cols() != m.cols())
    throw std::invalid_argument("finite_difference_check: gradient shape mismatch");
  double worst = 0.0;
  Matrix probe = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double up = f(probe);
    probe.data()[i] = orig - h;
    const double down = f(probe);
    probe.data()[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.data()[i];
    const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

double gradcheck(const std::function<Var(Tape&, Var)>& build, const Matrix& m, double h) {
  Tape tape;
  const Var x = tape.parameter(m);
  const Var loss = build(tape, x);
  const Matrix analytic = tape.backward(loss)[x];
  auto f = [&](const Matrix& probe) {
    Tape t;
    const Var p = t.parameter(probe);
    return t.value(build(t, p))(0, 0);
  };
  return finite_difference_check(f, m, analytic, h);
}

}  // namespace clora
