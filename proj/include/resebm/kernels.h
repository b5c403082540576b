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

#ifndef RESEBM_KERNELS_H_
#define RESEBM_KERNELS_H_

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "resebm/energy.h"
#include "resebm/language_model.h"
#include "resebm/types.h"

// Data-parallel inner loops of estimation and sampling. Every kernel has an
// OpenMP version (namespace kernels) and a serial reference
// (kernels::serial). Both produce the same results for any thread count:
// random draws use one stream per index and reductions run in index order.
namespace resebm::kernels {

struct Completions {
  SequenceBatch sequences;       // n rows of length T, history copied in
  std::vector<double> log_p_lm;  // log P_LM of each sampled completion
};

// Per-thread top-k samplers whose caches persist across calls. Not safe for
// concurrent use by independent callers.
class SamplerPool {
 public:
  SamplerPool(const LanguageModel& lm, std::size_t k);
  const LanguageModel& lm() const { return lm_; }
  std::size_t k() const { return k_; }
  // Makes sure every thread of the next parallel region has a slot.
  void Reserve(std::size_t threads);
  TopKSampler& ForThread(std::size_t thread);

 private:
  const LanguageModel& lm_;
  std::size_t k_;
  std::vector<std::unique_ptr<TopKSampler>> samplers_;
};

Completions DrawCompletions(SamplerPool& pool,
                            std::span<const TokenId> history, std::size_t T,
                            std::size_t n, std::uint64_t seed);

// n top-k completions of `history` to length T. Draw i uses
// StreamSeed(seed, i).
Completions DrawCompletions(const LanguageModel& lm,
                            std::span<const TokenId> history, std::size_t T,
                            std::size_t n, std::size_t k, std::uint64_t seed);

std::vector<double> Energies(const EnergyModel& energy,
                             const SequenceBatch& seqs, std::size_t p);

std::vector<double> SequenceLogProbs(const LanguageModel& lm,
                                     const SequenceBatch& seqs, std::size_t p);

// (1/n) sum_j [ logsumexp_{i != j} a_i - log(n - 1) ], n >= 2.
double MeanLeaveOneOutLogMean(std::span<const double> log_weights);

namespace serial {

Completions DrawCompletions(const LanguageModel& lm,
                            std::span<const TokenId> history, std::size_t T,
                            std::size_t n, std::size_t k, std::uint64_t seed);
std::vector<double> Energies(const EnergyModel& energy,
                             const SequenceBatch& seqs, std::size_t p);
std::vector<double> SequenceLogProbs(const LanguageModel& lm,
                                     const SequenceBatch& seqs, std::size_t p);
double MeanLeaveOneOutLogMean(std::span<const double> log_weights);

}  // namespace serial

// Sets the OpenMP worker count; 0 leaves the runtime default.
void SetThreads(int threads);
int MaxThreads();

}  // namespace resebm::kernels

#endif  // RESEBM_KERNELS_H_
