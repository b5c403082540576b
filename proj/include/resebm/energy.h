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

#ifndef RESEBM_ENERGY_H_
#define RESEBM_ENERGY_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "resebm/types.h"

namespace resebm {

// Residual energy E(x) over a full sequence whose first p tokens are the
// prefix. The joint model is P_LM(x) exp(-E(x)) / Z.
class EnergyModel {
 public:
  virtual ~EnergyModel() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t num_params() const = 0;
  virtual std::span<double> params() = 0;
  virtual std::span<const double> params() const = 0;

  // Throws std::runtime_error if the result is not finite.
  virtual double Energy(std::span<const TokenId> seq, std::size_t p) const = 0;

  // grad += scale * dE/dparams.
  virtual void AccumulateGrad(std::span<const TokenId> seq, std::size_t p,
                              double scale, std::span<double> grad) const = 0;

  std::vector<double> ParamGrad(std::span<const TokenId> seq,
                                std::size_t p) const;

  virtual std::unique_ptr<EnergyModel> Clone() const = 0;
};

// E(x) = c for every sequence. The single parameter is c.
class ConstantEnergy : public EnergyModel {
 public:
  explicit ConstantEnergy(double value = 0.0) : value_{value} {}

  std::string kind() const override { return "constant"; }
  std::size_t num_params() const override { return 1; }
  std::span<double> params() override { return value_; }
  std::span<const double> params() const override { return value_; }
  double Energy(std::span<const TokenId> seq, std::size_t p) const override;
  void AccumulateGrad(std::span<const TokenId> seq, std::size_t p, double scale,
                      std::span<double> grad) const override;
  std::unique_ptr<EnergyModel> Clone() const override {
    return std::make_unique<ConstantEnergy>(*this);
  }

 private:
  double value_[1];
};

// One free parameter per (prefix, completion) pair for a registered set of
// prefixes; any other sequence has energy 0 and no gradient. Only valid when
// |V|^(T-p) is at most `cap`.
class TabularEnergy : public EnergyModel {
 public:
  static constexpr std::size_t kDefaultCap = 65536;

  TabularEnergy(std::size_t vocab_size, std::size_t prefix_len,
                std::size_t seq_len, const std::vector<Tokens>& prefixes,
                std::size_t cap = kDefaultCap);

  std::string kind() const override { return "tabular"; }
  std::size_t num_params() const override { return table_.size(); }
  std::span<double> params() override { return table_; }
  std::span<const double> params() const override { return table_; }
  double Energy(std::span<const TokenId> seq, std::size_t p) const override;
  void AccumulateGrad(std::span<const TokenId> seq, std::size_t p, double scale,
                      std::span<double> grad) const override;
  std::unique_ptr<EnergyModel> Clone() const override {
    return std::make_unique<TabularEnergy>(*this);
  }

  std::size_t vocab_size() const { return vocab_size_; }
  std::size_t prefix_len() const { return prefix_len_; }
  std::size_t seq_len() const { return seq_len_; }
  std::size_t completions_per_prefix() const { return per_prefix_; }
  const std::vector<Tokens>& prefixes() const { return prefixes_; }

  // Parameter index of `seq`, or -1 if its prefix is not registered.
  std::ptrdiff_t Index(std::span<const TokenId> seq) const;

 private:
  std::uint64_t PrefixKey(std::span<const TokenId> prefix) const;

  std::size_t vocab_size_;
  std::size_t prefix_len_;
  std::size_t seq_len_;
  std::size_t per_prefix_;
  std::vector<Tokens> prefixes_;
  std::unordered_map<std::uint64_t, std::size_t> rows_;
  std::vector<double> table_;
};

enum class Direction { kCausal, kBidirectional };

Direction ParseDirection(std::string_view name);
std::string_view DirectionName(Direction d);

struct PooledScorerShape {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 8;
  std::size_t window = 1;  // half-width
  std::size_t hidden_dim = 16;
  Direction direction = Direction::kBidirectional;
};

// Windowed scorer: the feature at position t is tanh(W [e_{t-w} .. e_t] + b)
// (causal) or tanh(W [e_{t-w} .. e_{t+w}] + b) (bidirectional), with zero
// embeddings outside the sequence. Features are mean-pooled over the
// completion positions p..T-1 and projected to a scalar:
//   E(x) = proj_b + proj_w . mean_t h_t
class PooledScorer : public EnergyModel {
 public:
  // Embeddings and hidden weights ~ N(0, init_scale^2); the projection and
  // biases start at zero so the initial energy is 0.
  PooledScorer(const PooledScorerShape& shape, std::uint64_t seed,
               double init_scale = 0.3);

  std::string kind() const override { return "pooled"; }
  std::size_t num_params() const override { return params_.size(); }
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  double Energy(std::span<const TokenId> seq, std::size_t p) const override;
  void AccumulateGrad(std::span<const TokenId> seq, std::size_t p, double scale,
                      std::span<double> grad) const override;
  std::unique_ptr<EnergyModel> Clone() const override {
    return std::make_unique<PooledScorer>(*this);
  }

  const PooledScorerShape& shape() const { return shape_; }
  std::size_t window_slots() const;

  // Hidden activation h_t at position t.
  std::vector<double> PositionFeature(std::span<const TokenId> seq,
                                      std::size_t t) const;

  struct Block {
    const char* name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<Block> blocks() const;

  // Direct parameter access for hand-built scorers.
  double& embed(TokenId id, std::size_t k);
  double& hidden_w(std::size_t h, std::size_t i);
  double& hidden_b(std::size_t h);
  double& proj_w(std::size_t h);
  double& proj_b();

 private:
  void Feature(std::span<const TokenId> seq, std::size_t t,
               std::span<double> input, std::span<double> hidden) const;
  void CheckInput(std::span<const TokenId> seq, std::size_t p) const;

  PooledScorerShape shape_;
  std::size_t slots_;
  std::size_t off_hidden_w_, off_hidden_b_, off_proj_w_, off_proj_b_;
  std::vector<double> params_;
};

}  // namespace resebm

#endif  // RESEBM_ENERGY_H_
