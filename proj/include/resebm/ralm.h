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

#ifndef RESEBM_RALM_H_
#define RESEBM_RALM_H_

#include <memory>

#include "resebm/neural_lm.h"

namespace resebm {

// Residual autoregressive baseline:
//   log P(x_t | x_<t) = log_softmax(log P_base + log P_residual)
// The base stays frozen; only the residual is trained, by exact maximum
// likelihood of the combined model.
class Ralm : public LanguageModel {
 public:
  Ralm(std::shared_ptr<const LanguageModel> base,
       std::shared_ptr<NeuralLM> residual);

  std::size_t vocab_size() const override { return base_->vocab_size(); }
  std::size_t context_length() const override;
  std::string kind() const override { return "ralm"; }
  void NextLogProbsInto(std::span<const TokenId> history,
                        std::span<double> out) const override;

  const LanguageModel& base() const { return *base_; }
  const NeuralLM& residual() const { return *residual_; }
  NeuralLM& residual() { return *residual_; }
  std::shared_ptr<const LanguageModel> base_ptr() const { return base_; }

 private:
  std::shared_ptr<const LanguageModel> base_;
  std::shared_ptr<NeuralLM> residual_;
};

std::vector<double> TrainRalm(Ralm& model, const SequenceBatch& data,
                              const LmTrainConfig& cfg);

}  // namespace resebm

#endif  // RESEBM_RALM_H_
