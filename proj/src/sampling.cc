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

#include "resebm/sampling.h"

#include <cmath>
#include <stdexcept>
#include <string>

#include "resebm/estimation.h"
#include "resebm/kernels.h"
#include "resebm/numeric.h"

namespace resebm {

std::vector<double> ResampleWeights(std::span<const double> energies) {
  if (energies.empty()) throw std::invalid_argument("no proposals to weight");
  std::vector<double> neg(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (!std::isfinite(energies[i])) {
      throw std::invalid_argument("non-finite energy at proposal " +
                                  std::to_string(i));
    }
    neg[i] = -energies[i];
  }
  return Softmax(neg);
}

double ProposalSet::EffectiveSampleSize() const {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return s > 0.0 ? 1.0 / s : 0.0;
}

ProposalSet TopKJointSample(kernels::SamplerPool& pool,
                            const EnergyModel& energy,
                            std::span<const TokenId> prefix, std::size_t T,
                            std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("need at least one proposal");
  ProposalSet out;
  out.prefix.assign(prefix.begin(), prefix.end());
  out.k = pool.k();
  out.seed = seed;
  kernels::Completions draws =
      kernels::DrawCompletions(pool, prefix, T, n, StreamSeed(seed, 0));
  out.proposals = std::move(draws.sequences);
  out.log_p_lm = std::move(draws.log_p_lm);
  out.energies = kernels::Energies(energy, out.proposals, prefix.size());
  out.weights = ResampleWeights(out.energies);
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) cdf[i] = acc += out.weights[i];
  SplitMix64 rng(StreamSeed(seed, 1));
  out.chosen = SampleFromCdf(cdf, rng.Uniform());
  return out;
}

ProposalSet TopKJointSample(const LanguageModel& lm, const EnergyModel& energy,
                            std::span<const TokenId> prefix, std::size_t T,
                            std::size_t n, std::size_t k, std::uint64_t seed) {
  kernels::SamplerPool pool(lm, k);
  return TopKJointSample(pool, energy, prefix, T, n, seed);
}

StepCandidates ApproxStepConditional(const LanguageModel& lm,
                                     const EnergyModel& energy,
                                     std::span<const TokenId> x_prefix,
                                     std::size_t p, std::size_t T,
                                     std::size_t candidate_cap,
                                     std::size_t completions_per_candidate,
                                     std::uint64_t seed) {
  const std::size_t V = lm.vocab_size();
  if (candidate_cap < 1 || candidate_cap > V) {
    throw std::invalid_argument("candidate_cap must lie in [1, |V|]");
  }
  if (x_prefix.size() < p || x_prefix.size() >= T) {
    throw std::invalid_argument("need p <= t-1 < T");
  }
  if (completions_per_candidate < 1) {
    throw std::invalid_argument("completions_per_candidate must be >= 1");
  }
  const std::vector<double> lp = lm.NextLogProbs(x_prefix);
  const TopKDistribution top = MakeTopK(lp, candidate_cap);
  StepCandidates out;
  out.tokens = top.ids;
  std::vector<double> scores(candidate_cap);
  Tokens seq(x_prefix.begin(), x_prefix.end());
  seq.push_back(0);
  for (std::size_t c = 0; c < candidate_cap; ++c) {
    seq.back() = top.ids[c];
    double tn;
    if (seq.size() == T) {
      tn = -energy.Energy(seq, p);
    } else {
      const kernels::Completions draws = kernels::DrawCompletions(
          lm, seq, T, completions_per_candidate, V, StreamSeed(seed, c));
      tn = LogPartitionLower(kernels::Energies(energy, draws.sequences, p));
    }
    scores[c] = top.lm_log_probs[c] + tn;
  }
  out.probs = Softmax(scores);
  return out;
}

}  // namespace resebm
