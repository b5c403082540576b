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

#ifndef RESEBM_SAMPLING_H_
#define RESEBM_SAMPLING_H_

#include <cstdint>
#include <span>
#include <vector>

#include "resebm/energy.h"
#include "resebm/kernels.h"
#include "resebm/language_model.h"
#include "resebm/types.h"

namespace resebm {

// softmax(-energies). Throws on empty or non-finite input.
std::vector<double> ResampleWeights(std::span<const double> energies);

struct ProposalSet {
  Tokens prefix;
  SequenceBatch proposals;  // full sequences of length T
  std::vector<double> log_p_lm;
  std::vector<double> energies;
  std::vector<double> weights;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t chosen = 0;

  double EffectiveSampleSize() const;
};

// Draws n top-k LM completions of `prefix` to length T and resamples one
// with probability proportional to exp(-E).
ProposalSet TopKJointSample(const LanguageModel& lm, const EnergyModel& energy,
                            std::span<const TokenId> prefix, std::size_t T,
                            std::size_t n, std::size_t k, std::uint64_t seed);

// Same draw, reusing the pool's cached top-k distributions.
ProposalSet TopKJointSample(kernels::SamplerPool& pool,
                            const EnergyModel& energy,
                            std::span<const TokenId> prefix, std::size_t T,
                            std::size_t n, std::uint64_t seed);

struct StepCandidates {
  std::vector<TokenId> tokens;  // top LM tokens, most probable first
  std::vector<double> probs;    // renormalized joint estimate
};

// Approximate joint P(. | x_prefix) restricted to the candidate_cap most
// probable LM tokens. Each candidate's weight is P_LM(v) exp(T_n), with T_n
// from completions_per_candidate LM completions of (x_prefix, v).
StepCandidates ApproxStepConditional(const LanguageModel& lm,
                                     const EnergyModel& energy,
                                     std::span<const TokenId> x_prefix,
                                     std::size_t p, std::size_t T,
                                     std::size_t candidate_cap,
                                     std::size_t completions_per_candidate,
                                     std::uint64_t seed);

}  // namespace resebm

#endif  // RESEBM_SAMPLING_H_
