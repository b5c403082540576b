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

#include "resebm/ralm.h"

#include <algorithm>
#include <stdexcept>

#include "resebm/numeric.h"

namespace resebm {

Ralm::Ralm(std::shared_ptr<const LanguageModel> base,
           std::shared_ptr<NeuralLM> residual)
    : base_(std::move(base)), residual_(std::move(residual)) {
  if (!base_ || !residual_) throw std::invalid_argument("RALM needs two models");
  if (base_->vocab_size() != residual_->vocab_size()) {
    throw std::invalid_argument("RALM base and residual vocabularies differ");
  }
}

std::size_t Ralm::context_length() const {
  return std::max(base_->context_length(), residual_->context_length());
}

void Ralm::NextLogProbsInto(std::span<const TokenId> history,
                            std::span<double> out) const {
  std::vector<double> residual(vocab_size());
  base_->NextLogProbsInto(history, out);
  residual_->NextLogProbsInto(history, residual);
  for (std::size_t v = 0; v < out.size(); ++v) out[v] += residual[v];
  LogSoftmaxInPlace(out);
}

std::vector<double> TrainRalm(Ralm& model, const SequenceBatch& data,
                              const LmTrainConfig& cfg) {
  return TrainNeuralLm(model.residual(), data, cfg, &model.base());
}

}  // namespace resebm
