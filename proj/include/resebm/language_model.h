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

#ifndef RESEBM_LANGUAGE_MODEL_H_
#define RESEBM_LANGUAGE_MODEL_H_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "resebm/random.h"
#include "resebm/types.h"

namespace resebm {

// Locally normalized autoregressive model P_LM(x_t | x_<t).
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::size_t vocab_size() const = 0;

  // Number of trailing history tokens the prediction depends on. Histories
  // shorter than this are distinct contexts (left-truncated at the start).
  virtual std::size_t context_length() const = 0;

  virtual std::string kind() const = 0;

  // Writes log P(. | history) into `out` (size vocab_size()). The entries
  // log-sum-exp to 0. History ids are assumed valid.
  virtual void NextLogProbsInto(std::span<const TokenId> history,
                                std::span<double> out) const = 0;

  // Checked variant: throws std::out_of_range on an invalid history id.
  std::vector<double> NextLogProbs(std::span<const TokenId> history) const;
};

void CheckIds(std::span<const TokenId> ids, std::size_t vocab_size);

// sum_{t=p}^{T-1} log P(x_t | x_<t) over the completion of `seq` (0-based
// positions; the first p tokens are the prefix).
double SequenceLogProb(const LanguageModel& lm, std::span<const TokenId> seq,
                       std::size_t p);

// Top-k restriction of a next-token distribution: the k most probable ids
// (ties broken by lower id), in that order.
struct TopKDistribution {
  std::vector<TokenId> ids;
  std::vector<double> cdf;       // cumulative renormalized probabilities
  std::vector<double> lm_log_probs;  // untruncated log P_LM of each id
};

TopKDistribution MakeTopK(std::span<const double> log_probs, std::size_t k);

// Draws completions by per-step top-k sampling. Caches the truncated
// distribution per distinct context, so an instance must not be shared
// between threads.
class TopKSampler {
 public:
  TopKSampler(const LanguageModel& lm, std::size_t k);

  std::size_t k() const { return k_; }

  // Fills seq[from..] in place; seq[0..from) is the conditioning history.
  // Returns log P_LM of the sampled tokens (untruncated model).
  double Complete(std::span<TokenId> seq, std::size_t from, SplitMix64& rng);

  const TopKDistribution& Distribution(std::span<const TokenId> history);

 private:
  const LanguageModel& lm_;
  std::size_t k_;
  bool packed_keys_;
  std::unordered_map<std::uint64_t, TopKDistribution> packed_cache_;
  std::unordered_map<std::string, TopKDistribution> string_cache_;
  std::vector<double> scratch_;
};

// Extends `prefix` to length T by top-k sampling, deterministic in `seed`.
Tokens SampleCompletionTopK(const LanguageModel& lm,
                            std::span<const TokenId> prefix, std::size_t T,
                            std::size_t k, std::uint64_t seed);

}  // namespace resebm

#endif  // RESEBM_LANGUAGE_MODEL_H_
