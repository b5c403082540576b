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

#ifndef RESEBM_NGRAM_LM_H_
#define RESEBM_NGRAM_LM_H_

#include <map>
#include <span>
#include <vector>

#include "resebm/corpus.h"
#include "resebm/language_model.h"

namespace resebm {

// Additively smoothed n-gram model:
//   P(w | h) = (c(h, w) + alpha) / (c(h) + alpha |V|)
// where h is the previous order-1 tokens, left-truncated at the start of a
// sequence.
class NGramLM : public LanguageModel {
 public:
  NGramLM(std::size_t vocab_size, std::size_t order, double alpha);

  std::size_t vocab_size() const override { return vocab_size_; }
  std::size_t context_length() const override { return order_ - 1; }
  std::string kind() const override { return "ngram"; }
  void NextLogProbsInto(std::span<const TokenId> history,
                        std::span<double> out) const override;

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }

  // Adds `count` observations of `next` after `context` (already truncated
  // to at most order-1 tokens).
  void AddCount(std::span<const TokenId> context, TokenId next, double count);

  // Counts every position of a sequence.
  void AddSequence(std::span<const TokenId> seq);

  double Count(std::span<const TokenId> context, TokenId next) const;

  // Context -> per-token counts, ordered for serialization.
  const std::map<Tokens, std::vector<double>>& counts() const {
    return counts_;
  }

 private:
  struct Row {
    std::vector<double> counts;
    double total = 0.0;
  };

  const Row* FindRow(std::span<const TokenId> context) const;

  std::size_t vocab_size_;
  std::size_t order_;
  double alpha_;
  std::map<Tokens, std::vector<double>> counts_;
  std::unordered_map<std::string, Row> rows_;
};

NGramLM FitNGram(const SequenceBatch& sequences, std::size_t vocab_size,
                 std::size_t order, double alpha);

}  // namespace resebm

#endif  // RESEBM_NGRAM_LM_H_
