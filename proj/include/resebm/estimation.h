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

#ifndef RESEBM_ESTIMATION_H_
#define RESEBM_ESTIMATION_H_

#include <cstdint>
#include <span>
#include <vector>

#include "resebm/corpus.h"
#include "resebm/energy.h"
#include "resebm/language_model.h"
#include "resebm/types.h"

namespace resebm {

// Interval for log Z = log E_{P_LM}[exp(-E)] from n samples.
struct LogZBounds {
  double lower = 0.0;  // T_n
  double upper = 0.0;  // (2n-1) T_n - 2(n-1) mean leave-one-out T_{n-1}
  std::size_t n = 0;
};

struct StepProbBounds {
  TokenId token = 0;
  std::size_t t = 0;  // 1-based position of `token` in the sequence
  double lower = 0.0;
  double upper = 0.0;
  std::size_t n = 0;
  bool exact = false;
  bool exceeds_zero = false;  // an endpoint above 0, reported as-is
};

struct PplBounds {
  double lower_ppl = 0.0;
  double upper_ppl = 0.0;
  std::size_t tokens_scored = 0;
  std::size_t n = 0;
};

double LogPartitionLower(std::span<const double> energies);
double LogPartitionUpper(std::span<const double> energies);
LogZBounds LogPartitionBounds(std::span<const double> energies);

// Draws n completions of `history` (to length T) from the full LM and
// bounds log Z of the energy, which scores sequences with prefix length p.
LogZBounds EstimateLogPartition(const LanguageModel& lm,
                                const EnergyModel& energy,
                                std::span<const TokenId> history,
                                std::size_t p, std::size_t T, std::size_t n,
                                std::uint64_t seed);

// Interval for log P_theta(x[p..T) | x[0..p)).
struct LogProbInterval {
  double lower = 0.0;
  double upper = 0.0;
};
LogProbInterval JointLogProbBounds(const LanguageModel& lm,
                                   const EnergyModel& energy,
                                   std::span<const TokenId> x, std::size_t p,
                                   std::size_t n, std::uint64_t seed);

// log Z is estimated once per distinct prefix.
PplBounds EstimatePplBounds(const LanguageModel& lm, const EnergyModel& energy,
                            const PrefixDataset& data, std::size_t n,
                            std::uint64_t seed);

// Exact perplexity of the LM alone on the completions of `data`.
double ExactLmPpl(const LanguageModel& lm, const PrefixDataset& data);

// Bounds on log P(token | x_prefix) under the joint model, where
// x_prefix.size() >= p. The last position is computed exactly.
StepProbBounds StepConditionalBounds(const LanguageModel& lm,
                                     const EnergyModel& energy,
                                     std::span<const TokenId> x_prefix,
                                     TokenId token, std::size_t p,
                                     std::size_t T, std::size_t n,
                                     std::uint64_t seed);

// Exact log P(. | x_prefix) under the joint model at the last position
// (x_prefix.size() == T - 1); one entry per vocabulary id.
std::vector<double> ExactLastStepLogProbs(const LanguageModel& lm,
                                          const EnergyModel& energy,
                                          std::span<const TokenId> x_prefix,
                                          std::size_t p);

// ---- Exact enumeration ----------------------------------------------------

inline constexpr std::size_t kDefaultEnumerationCap = 65536;

struct Enumeration {
  SequenceBatch sequences;      // every completion, lexicographic order
  std::vector<double> log_p_lm;
};

// All |V|^(T - history.size()) completions of `history`. Row i holds the
// completion whose base-|V| code (first token most significant) is i.
Enumeration EnumerateCompletions(const LanguageModel& lm,
                                 std::span<const TokenId> history,
                                 std::size_t T,
                                 std::size_t cap = kDefaultEnumerationCap);

std::size_t CompletionCode(std::span<const TokenId> completion,
                           std::size_t vocab_size);
Tokens DecodeCompletion(std::size_t code, std::size_t length,
                        std::size_t vocab_size);

double ExactLogPartition(const LanguageModel& lm, const EnergyModel& energy,
                         std::span<const TokenId> prefix, std::size_t T,
                         std::size_t cap = kDefaultEnumerationCap);

// Joint probabilities of every completion, indexed by CompletionCode.
std::vector<double> ExactJointDistribution(
    const LanguageModel& lm, const EnergyModel& energy,
    std::span<const TokenId> prefix, std::size_t T,
    std::size_t cap = kDefaultEnumerationCap);

// Exact log P(token | x_prefix) under the joint model by marginalizing the
// full joint over completions sharing x_prefix and token.
double ExactStepLogProb(const LanguageModel& lm, const EnergyModel& energy,
                        std::span<const TokenId> x_prefix, TokenId token,
                        std::size_t p, std::size_t T,
                        std::size_t cap = kDefaultEnumerationCap);

}  // namespace resebm

#endif  // RESEBM_ESTIMATION_H_
