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

#include "clora/checkpoint.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace clora {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'L', 'O', 'R', 'A', 'C', 'K', 'P'};

// Sanity bound on any stored length, so a corrupt file fails instead of
// attempting a huge allocation.
constexpr std::uint64_t kMaxLength = std::uint64_t{1} << 32;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u64(std::uint64_t v) {
    std::array<char, 8> bytes;
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(bytes.data(), bytes.size());
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.data()) f64(v);
  }
  void matrices(const std::vector<Matrix>& ms) {
    u64(ms.size());
    for (const Matrix& m : ms) matrix(m);
  }
  void rng(const Rng::State& s) {
    for (std::uint64_t w : s) u64(w);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() {
    const int c = in_.get();
    if (c == std::char_traits<char>::eof()) truncated();
    return static_cast<std::uint8_t>(c);
  }
  std::uint64_t u64() {
    std::array<unsigned char, 8> bytes;
    if (!in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) truncated();
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t length() {
    const std::uint64_t n = u64();
    if (n > kMaxLength) throw std::runtime_error("checkpoint: implausible length field (corrupt file?)");
    return n;
  }
  std::string str() {
    std::string s(length(), '\0');
    if (!in_.read(s.data(), static_cast<std::streamsize>(s.size()))) truncated();
    return s;
  }
  Matrix matrix() {
    const std::uint64_t rows = length();
    const std::uint64_t cols = length();
    if (rows * cols > kMaxLength) throw std::runtime_error("checkpoint: implausible matrix size (corrupt file?)");
    std::vector<double> data(rows * cols);
    for (double& v : data) v = f64();
    if (rows == 0 || cols == 0) return Matrix();
    return Matrix(rows, cols, std::move(data));
  }
  std::vector<Matrix> matrices() {
    std::vector<Matrix> out(length());
    for (Matrix& m : out) m = matrix();
    return out;
  }
  Rng::State rng() {
    Rng::State s;
    for (std::uint64_t& w : s) w = u64();
    return s;
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  }

 private:
  [[noreturn]] static void truncated() { throw std::runtime_error("checkpoint: truncated file"); }
  std::istream& in_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  w.u8(kCheckpointVersion);
  w.u64(config_hash(ckpt.config));
  w.str(serialize(ckpt.config));

  const auto& base = ckpt.model.base();
  w.u64(base.size());
  for (const auto& [name, m] : base) {
    w.str(name);
    w.matrix(m);
  }
  const auto& adapters = ckpt.model.adapters();
  w.u64(adapters.size());
  for (const auto& [name, ad] : adapters) {
    w.str(name);
    w.matrix(ad.a);
    w.matrix(ad.b);
    w.u64(ad.rank);
    w.f64(ad.alpha);
    w.u8(ad.reg ? 1 : 0);
    if (ad.reg) {
      w.u8(static_cast<std::uint8_t>(ad.reg->variant));
      w.u64(ad.reg->k);
      w.matrix(ad.reg->p_a);
      w.matrix(ad.reg->p_b);
    }
  }

  const TrainState& s = ckpt.state;
  w.u64(static_cast<std::uint64_t>(s.step));
  w.u64(s.epoch);
  w.rng(s.shuffle_rng);
  w.rng(s.dropout_rng);
  w.u64(s.loss_curve.size());
  for (double v : s.loss_curve) w.f64(v);
  w.matrices(s.adam.m);
  w.matrices(s.adam.v);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
  out.close();
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

Checkpoint read_checkpoint(std::istream& in, std::optional<std::uint64_t> expected_hash) {
  Reader r(in);
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw std::runtime_error("checkpoint: not a checkpoint file (bad magic)");
  const std::uint8_t version = r.u8();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  const std::uint64_t stored_hash = r.u64();
  ExperimentConfig config = parse_config(r.str());
  if (config_hash(config) != stored_hash) throw std::runtime_error("checkpoint: config hash does not match its config");
  if (expected_hash && *expected_hash != stored_hash)
    throw std::runtime_error("checkpoint: written under a different config (hash mismatch)");

  std::map<std::string, Matrix> base;
  for (std::uint64_t i = 0, n = r.length(); i < n; ++i) {
    std::string name = r.str();
    base[name] = r.matrix();
  }
  std::map<std::string, LoraAdapter> adapters;
  for (std::uint64_t i = 0, n = r.length(); i < n; ++i) {
    std::string name = r.str();
    auto it = base.find(name);
    if (it == base.end()) throw std::runtime_error("checkpoint: adapter '" + name + "' has no base matrix");
    LoraAdapter ad;
    ad.w = it->second;
    ad.a = r.matrix();
    ad.b = r.matrix();
    ad.rank = r.u64();
    ad.alpha = r.f64();
    if (r.u8() != 0) {
      RegPair reg;
      const std::uint8_t variant = r.u8();
      if (variant > static_cast<std::uint8_t>(RegVariant::kSvdMinor))
        throw std::runtime_error("checkpoint: unknown regularization variant");
      reg.variant = static_cast<RegVariant>(variant);
      reg.k = r.u64();
      reg.p_a = r.matrix();
      reg.p_b = r.matrix();
      ad.reg = std::move(reg);
    }
    adapters.emplace(std::move(name), std::move(ad));
  }

  TrainState s;
  s.step = static_cast<std::int64_t>(r.u64());
  s.epoch = r.u64();
  s.shuffle_rng = r.rng();
  s.dropout_rng = r.rng();
  s.loss_curve.resize(r.length());
  for (double& v : s.loss_curve) v = r.f64();
  s.adam.m = r.matrices();
  s.adam.v = r.matrices();
  r.expect_end();

  TinyModel model = TinyModel::assemble(config.model, std::move(base), std::move(adapters));
  return Checkpoint{std::move(config), std::move(model), std::move(s)};
}

Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  return read_checkpoint(in, expected_hash);
}

}  // namespace clora
