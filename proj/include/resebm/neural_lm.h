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

#ifndef RESEBM_NEURAL_LM_H_
#define RESEBM_NEURAL_LM_H_

#include <cstdint>
#include <span>
#include <vector>

#include "resebm/language_model.h"

namespace resebm {

struct NeuralLmShape {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 8;
  std::size_t context_window = 2;
  std::size_t hidden_dim = 16;
};

// Fixed-window feed-forward language model: concatenated embeddings of the
// previous `context_window` tokens (zeros before the sequence start), one
// tanh hidden layer, softmax output over the vocabulary. The small and big
// baselines differ only in hidden_dim.
class NeuralLM : public LanguageModel {
 public:
  // Embeddings and hidden weights ~ N(0, init_scale^2); biases and the
  // output layer start at zero, so the initial prediction is uniform.
  NeuralLM(const NeuralLmShape& shape, std::uint64_t seed,
           double init_scale = 0.1);

  std::size_t vocab_size() const override { return shape_.vocab_size; }
  std::size_t context_length() const override { return shape_.context_window; }
  std::string kind() const override { return "neural"; }
  void NextLogProbsInto(std::span<const TokenId> history,
                        std::span<double> out) const override;

  const NeuralLmShape& shape() const { return shape_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // Named parameter blocks in storage order.
  struct Block {
    const char* name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<Block> blocks() const;

  // Cross-entropy -log P(seq[pos] | seq[0..pos)) and grad += scale * dloss.
  // With `base`, the prediction is the residual combination
  // log_softmax(log P_base + logits) and only this model's parameters get
  // gradients.
  double LossAndGrad(std::span<const TokenId> seq, std::size_t pos,
                     const LanguageModel* base, double scale,
                     std::span<double> grad) const;

 private:
  struct Layout {
    std::size_t embed, hidden_w, hidden_b, out_w, out_b, total;
  };
  static Layout MakeLayout(const NeuralLmShape& s);

  void Forward(std::span<const TokenId> history, std::span<double> input,
               std::span<double> hidden, std::span<double> logits) const;

  NeuralLmShape shape_;
  Layout layout_;
  std::vector<double> params_;
};

struct LmTrainConfig {
  double lr = 0.1;
  std::size_t steps = 1000;
  std::size_t batch = 32;
  double clip_norm = 10.0;
  std::uint64_t seed = 1;
};

// Minibatch SGD on mean token cross-entropy over every position of every
// sequence. Returns the per-step mean loss in nats. Throws
// std::runtime_error on a non-finite loss. With `frozen_base`, trains the
// residual of a RALM whose base model stays fixed.
std::vector<double> TrainNeuralLm(NeuralLM& model, const SequenceBatch& data,
                                  const LmTrainConfig& cfg,
                                  const LanguageModel* frozen_base = nullptr);

// Mean per-token cross-entropy (nats) of `lm` over every position.
double MeanCrossEntropy(const LanguageModel& lm, const SequenceBatch& data);

}  // namespace resebm

#endif  // RESEBM_NEURAL_LM_H_
