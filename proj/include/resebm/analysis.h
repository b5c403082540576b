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

#ifndef RESEBM_ANALYSIS_H_
#define RESEBM_ANALYSIS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "resebm/corpus.h"
#include "resebm/energy.h"
#include "resebm/language_model.h"
#include "resebm/types.h"

namespace resebm {

// 100 * distinct n-grams / n-gram slots, pooled over all samples.
double UniqueNgramPct(const std::vector<Tokens>& samples, std::size_t n);
double UniqueNgramPct(const SequenceBatch& samples, std::size_t n);

using SequenceScorer = std::function<double(std::span<const TokenId>)>;

// log P_LM(completion | prefix).
SequenceScorer LmScorer(const LanguageModel& lm, std::size_t p);

// log P_LM - E - T_n, with T_n estimated once per prefix from n samples.
SequenceScorer JointPointScorer(const LanguageModel& lm,
                                const EnergyModel& energy, std::size_t p,
                                std::size_t T, std::size_t n,
                                std::uint64_t seed);

struct NamedSet {
  std::string name;
  SequenceBatch sequences;
};

struct DensitySummary {
  std::string name;
  std::vector<double> scores;
  std::vector<std::size_t> counts;  // one per bin
  double mean = 0.0;
  double mean_gap = 0.0;  // |mean - mean of the first (reference) set|
};

struct DensityReport {
  std::vector<double> edges;  // bins + 1 ascending edges shared by all sets
  std::vector<DensitySummary> sets;

  // Header: set,bin_lo,bin_hi,count,mean,mean_gap
  std::string ToCsv() const;
};

DensityReport ScoreDensityReport(const SequenceScorer& scorer,
                                 const std::vector<NamedSet>& sets,
                                 std::size_t bins);

struct SweepRow {
  std::size_t n = 0;
  double mean_lower = 0.0;  // perplexity
  double mean_upper = 0.0;
  double stderr_width = 0.0;
};

// Joint-model perplexity bounds averaged over `trials` seeded repeats at
// each sample count.
std::vector<SweepRow> EstimatorSweep(const LanguageModel& lm,
                                     const EnergyModel& energy,
                                     const PrefixDataset& data,
                                     const std::vector<std::size_t>& n_values,
                                     std::size_t trials, std::uint64_t seed);

// Header: n,mean_lower,mean_upper,stderr
std::string SweepCsv(const std::vector<SweepRow>& rows);

// Shortest round-trip decimal representation used by every CSV report.
std::string FormatReal(double v);

}  // namespace resebm

#endif  // RESEBM_ANALYSIS_H_
