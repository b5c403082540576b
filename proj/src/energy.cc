// Copyright 2026 The resebm Authors.
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

#include "resebm/energy.h"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "resebm/language_model.h"
#include "resebm/numeric.h"

namespace resebm {

namespace {

[[noreturn]] void ThrowNonFinite(const EnergyModel& m, double value) {
  std::ostringstream msg;
  msg << m.kind() << " energy is not finite (" << value << "); parameter norm "
      << L2Norm(m.params())
      << (AllFinite(m.params()) ? "" : ", parameters contain non-finite values");
  throw std::runtime_error(msg.str());
}

void CheckPrefix(std::span<const TokenId> seq, std::size_t p) {
  if (p >= seq.size()) {
    throw std::invalid_argument("energy needs p < T (p=" + std::to_string(p) +
                                ", T=" + std::to_string(seq.size()) + ")");
  }
}

}  // namespace

std::vector<double> EnergyModel::ParamGrad(std::span<const TokenId> seq,
                                           std::size_t p) const {
  std::vector<double> g(num_params(), 0.0);
  AccumulateGrad(seq, p, 1.0, g);
  return g;
}

double ConstantEnergy::Energy(std::span<const TokenId> seq,
                              std::size_t p) const {
  CheckPrefix(seq, p);
  if (!std::isfinite(value_[0])) ThrowNonFinite(*this, value_[0]);
  return value_[0];
}

void ConstantEnergy::AccumulateGrad(std::span<const TokenId> seq, std::size_t p,
                                    double scale,
                                    std::span<double> grad) const {
  CheckPrefix(seq, p);
  grad[0] += scale;
}

TabularEnergy::TabularEnergy(std::size_t vocab_size, std::size_t prefix_len,
                             std::size_t seq_len,
                             const std::vector<Tokens>& prefixes,
                             std::size_t cap)
    : vocab_size_(vocab_size),
      prefix_len_(prefix_len),
      seq_len_(seq_len),
      per_prefix_(1) {
  if (prefix_len >= seq_len) throw std::invalid_argument("tabular: p >= T");
  if (vocab_size < 2) throw std::invalid_argument("tabular: |V| < 2");
  for (std::size_t i = prefix_len; i < seq_len; ++i) {
    if (per_prefix_ > cap / vocab_size) {
      throw std::invalid_argument(
          "tabular energy needs |V|^(T-p) <= " + std::to_string(cap));
    }
    per_prefix_ *= vocab_size;
  }
  if (static_cast<double>(prefix_len) *
          std::log2(static_cast<double>(vocab_size)) >= 63.0) {
    throw std::invalid_argument("tabular energy prefix too long to index");
  }
  for (const auto& prefix : prefixes) {
    if (prefix.size() != prefix_len) {
      throw std::invalid_argument("tabular prefix has wrong length");
    }
    CheckIds(prefix, vocab_size);
    if (rows_.emplace(PrefixKey(prefix), prefixes_.size()).second) {
      prefixes_.push_back(prefix);
    }
  }
  table_.assign(prefixes_.size() * per_prefix_, 0.0);
}

std::uint64_t TabularEnergy::PrefixKey(std::span<const TokenId> prefix) const {
  std::uint64_t key = 0;
  for (TokenId id : prefix) key = key * vocab_size_ + id;
  return key;
}

std::ptrdiff_t TabularEnergy::Index(std::span<const TokenId> seq) const {
  if (seq.size() != seq_len_) {
    throw std::invalid_argument("tabular energy: sequence length " +
                                std::to_string(seq.size()) + " != T=" +
                                std::to_string(seq_len_));
  }
  CheckIds(seq, vocab_size_);
  auto it = rows_.find(PrefixKey(seq.first(prefix_len_)));
  if (it == rows_.end()) return -1;
  std::size_t code = 0;
  for (std::size_t t = prefix_len_; t < seq_len_; ++t) {
    code = code * vocab_size_ + seq[t];
  }
  return static_cast<std::ptrdiff_t>(it->second * per_prefix_ + code);
}

double TabularEnergy::Energy(std::span<const TokenId> seq,
                             std::size_t p) const {
  if (p != prefix_len_) throw std::invalid_argument("tabular energy: p mismatch");
  const std::ptrdiff_t idx = Index(seq);
  const double e = idx < 0 ? 0.0 : table_[static_cast<std::size_t>(idx)];
  if (!std::isfinite(e)) ThrowNonFinite(*this, e);
  return e;
}

void TabularEnergy::AccumulateGrad(std::span<const TokenId> seq, std::size_t p,
                                   double scale,
                                   std::span<double> grad) const {
  if (p != prefix_len_) throw std::invalid_argument("tabular energy: p mismatch");
  const std::ptrdiff_t idx = Index(seq);
  if (idx >= 0) grad[static_cast<std::size_t>(idx)] += scale;
}

Direction ParseDirection(std::string_view name) {
  if (name == "causal") return Direction::kCausal;
  if (name == "bidirectional") return Direction::kBidirectional;
  throw std::invalid_argument("unknown direction '" + std::string(name) +
                              "' (expected causal or bidirectional)");
}

std::string_view DirectionName(Direction d) {
  return d == Direction::kCausal ? "causal" : "bidirectional";
}

PooledScorer::PooledScorer(const PooledScorerShape& shape, std::uint64_t seed,
                           double init_scale)
    : shape_(shape) {
  if (shape.vocab_size < 2 || shape.embed_dim == 0 || shape.hidden_dim == 0) {
    throw std::invalid_argument("PooledScorer: dimensions must be positive");
  }
  slots_ = window_slots();
  const std::size_t V = shape.vocab_size;
  const std::size_t d = shape.embed_dim;
  const std::size_t H = shape.hidden_dim;
  off_hidden_w_ = V * d;
  off_hidden_b_ = off_hidden_w_ + H * slots_ * d;
  off_proj_w_ = off_hidden_b_ + H;
  off_proj_b_ = off_proj_w_ + H;
  params_.assign(off_proj_b_ + 1, 0.0);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, init_scale);
  for (std::size_t i = 0; i < off_hidden_b_; ++i) params_[i] = normal(gen);
}

std::size_t PooledScorer::window_slots() const {
  return shape_.direction == Direction::kCausal ? shape_.window + 1
                                                : 2 * shape_.window + 1;
}

std::vector<PooledScorer::Block> PooledScorer::blocks() const {
  return {{"embed", 0, off_hidden_w_},
          {"hidden_w", off_hidden_w_, off_hidden_b_ - off_hidden_w_},
          {"hidden_b", off_hidden_b_, off_proj_w_ - off_hidden_b_},
          {"proj_w", off_proj_w_, off_proj_b_ - off_proj_w_},
          {"proj_b", off_proj_b_, 1}};
}

double& PooledScorer::embed(TokenId id, std::size_t k) {
  return params_.at(id * shape_.embed_dim + k);
}
double& PooledScorer::hidden_w(std::size_t h, std::size_t i) {
  return params_.at(off_hidden_w_ + h * slots_ * shape_.embed_dim + i);
}
double& PooledScorer::hidden_b(std::size_t h) {
  return params_.at(off_hidden_b_ + h);
}
double& PooledScorer::proj_w(std::size_t h) { return params_.at(off_proj_w_ + h); }
double& PooledScorer::proj_b() { return params_[off_proj_b_]; }

void PooledScorer::CheckInput(std::span<const TokenId> seq,
                              std::size_t p) const {
  CheckPrefix(seq, p);
  CheckIds(seq, shape_.vocab_size);
}

void PooledScorer::Feature(std::span<const TokenId> seq, std::size_t t,
                           std::span<double> input,
                           std::span<double> hidden) const {
  const std::size_t d = shape_.embed_dim;
  const std::size_t in = slots_ * d;
  const auto first = static_cast<std::ptrdiff_t>(t) -
                     static_cast<std::ptrdiff_t>(shape_.window);
  for (std::size_t s = 0; s < slots_; ++s) {
    const std::ptrdiff_t pos = first + static_cast<std::ptrdiff_t>(s);
    double* dst = input.data() + s * d;
    if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(seq.size())) {
      std::fill(dst, dst + d, 0.0);
    } else {
      const double* e = &params_[seq[static_cast<std::size_t>(pos)] * d];
      std::copy(e, e + d, dst);
    }
  }
  for (std::size_t h = 0; h < shape_.hidden_dim; ++h) {
    const double* w = &params_[off_hidden_w_ + h * in];
    double a = params_[off_hidden_b_ + h];
    for (std::size_t i = 0; i < in; ++i) a += w[i] * input[i];
    hidden[h] = std::tanh(a);
  }
}

std::vector<double> PooledScorer::PositionFeature(std::span<const TokenId> seq,
                                                  std::size_t t) const {
  CheckIds(seq, shape_.vocab_size);
  if (t >= seq.size()) throw std::out_of_range("position outside sequence");
  std::vector<double> input(slots_ * shape_.embed_dim);
  std::vector<double> hidden(shape_.hidden_dim);
  Feature(seq, t, input, hidden);
  return hidden;
}

double PooledScorer::Energy(std::span<const TokenId> seq, std::size_t p) const {
  CheckInput(seq, p);
  const std::size_t H = shape_.hidden_dim;
  thread_local std::vector<double> input, hidden, pooled;
  input.resize(slots_ * shape_.embed_dim);
  hidden.resize(H);
  pooled.assign(H, 0.0);
  for (std::size_t t = p; t < seq.size(); ++t) {
    Feature(seq, t, input, hidden);
    for (std::size_t h = 0; h < H; ++h) pooled[h] += hidden[h];
  }
  const double inv = 1.0 / static_cast<double>(seq.size() - p);
  double e = params_[off_proj_b_];
  for (std::size_t h = 0; h < H; ++h) {
    e += params_[off_proj_w_ + h] * pooled[h] * inv;
  }
  if (!std::isfinite(e)) ThrowNonFinite(*this, e);
  return e;
}

void PooledScorer::AccumulateGrad(std::span<const TokenId> seq, std::size_t p,
                                  double scale,
                                  std::span<double> grad) const {
  CheckInput(seq, p);
  const std::size_t d = shape_.embed_dim;
  const std::size_t H = shape_.hidden_dim;
  const std::size_t in = slots_ * d;
  const double inv = 1.0 / static_cast<double>(seq.size() - p);
  thread_local std::vector<double> input, hidden, dinput;
  input.resize(in);
  hidden.resize(H);
  dinput.resize(in);
  grad[off_proj_b_] += scale;
  const auto first_offset = static_cast<std::ptrdiff_t>(shape_.window);
  for (std::size_t t = p; t < seq.size(); ++t) {
    Feature(seq, t, input, hidden);
    std::fill(dinput.begin(), dinput.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      grad[off_proj_w_ + h] += scale * hidden[h] * inv;
      const double da =
          params_[off_proj_w_ + h] * inv * (1.0 - hidden[h] * hidden[h]);
      if (da == 0.0) continue;
      grad[off_hidden_b_ + h] += scale * da;
      double* gw = &grad[off_hidden_w_ + h * in];
      const double* w = &params_[off_hidden_w_ + h * in];
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += scale * da * input[i];
        dinput[i] += da * w[i];
      }
    }
    for (std::size_t s = 0; s < slots_; ++s) {
      const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - first_offset +
                                 static_cast<std::ptrdiff_t>(s);
      if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(seq.size())) continue;
      double* ge = &grad[seq[static_cast<std::size_t>(pos)] * d];
      for (std::size_t k = 0; k < d; ++k) ge[k] += scale * dinput[s * d + k];
    }
  }
}

}  // namespace resebm
