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

#ifndef RESEBM_TOY_TASK_H_
#define RESEBM_TOY_TASK_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "resebm/config.h"
#include "resebm/corpus.h"
#include "resebm/energy.h"
#include "resebm/ngram_lm.h"
#include "resebm/training.h"

namespace resebm {

struct NGramShape {
  std::size_t vocab_size = 6;
  std::size_t order = 2;
  double peak = 3.0;  // log-count scale; larger is more peaked
  bool never_unknown = true;
  bool never_repeat = false;
};

// An n-gram LM whose rows are proportional to exp(peak * z), z ~ N(0, 1).
// Excluded tokens get zero counts (probability ~1e-12 from smoothing).
std::shared_ptr<NGramLM> MakeRandomNGram(const NGramShape& shape,
                                         std::uint64_t seed);

// count sequences of length T drawn from the LM, each continuing `history`.
SequenceBatch SampleSequences(const LanguageModel& lm,
                              std::span<const TokenId> history, std::size_t T,
                              std::size_t count, std::size_t k,
                              std::uint64_t seed);

// The enumerable task: data LM A, base LM B fit on samples of A with heavy
// smoothing, and positives for the most probable prefixes under A.
struct ToyConfig {
  std::size_t vocab_size = 6;
  std::size_t prefix_len = 2;
  std::size_t seq_len = 5;
  std::size_t enum_cap = 216;
  double data_peak = 3.0;
  std::size_t base_order = 2;
  double base_alpha = 200.0;
  std::size_t base_train_samples = 5000;
  std::size_t num_prefixes = 4;
  std::size_t positives_per_prefix = 10000;
  std::size_t negatives_per_prefix = 10000;
  NceConfig tabular_nce{10.0, 20000, 2048, 1, 10.0, 1};
  std::size_t pooled_train_sequences = 20000;
  PooledScorerShape pooled_shape{6, 8, 1, 16, Direction::kBidirectional};
  NceConfig pooled_nce{0.5, 4000, 64, 1, 10.0, 1};
  std::size_t heldout_sequences = 1000;
  std::uint64_t seed = 1;

  static ToyConfig FromConfig(const Config& cfg);
};

struct ToyTask {
  ToyConfig cfg;
  std::shared_ptr<NGramLM> data_lm;
  std::shared_ptr<NGramLM> base_lm;
  std::vector<Tokens> prefixes;  // most probable under A first
  PrefixDataset positives;       // positives_per_prefix items per prefix
};

ToyTask BuildToyTask(const ToyConfig& cfg);

// Negatives for the tabular positives, negatives_per_prefix per prefix.
NegativeSet ToyNegatives(const ToyTask& task);

std::unique_ptr<TabularEnergy> TrainToyTabular(const ToyTask& task,
                                               std::vector<double>* curve = nullptr);

// Full-length samples of A with prefixes drawn from A, used for the pooled
// scorer and held-out perplexity.
PrefixDataset ToyTrainingSet(const ToyTask& task);
PrefixDataset ToyHeldoutSet(const ToyTask& task);

std::unique_ptr<PooledScorer> TrainToyPooled(const ToyTask& task,
                                             std::vector<double>* curve = nullptr);

// Exact completion distribution of A given a prefix, indexed by completion
// code.
std::vector<double> ToyDataDistribution(const ToyTask& task,
                                        std::span<const TokenId> prefix);

// Text lines from A, ids 1.. mapped to letters "a", "b", ...
std::vector<std::string> ToyCorpusLines(const ToyTask& task, std::size_t count,
                                        std::uint64_t seed);

// Repetition-prone base LM: B repeats the previous token with probability
// rho and otherwise follows A, which never repeats.
struct RepetitionConfig {
  std::size_t vocab_size = 300;
  std::size_t prefix_len = 1;
  std::size_t seq_len = 9;
  double data_peak = 1.0;
  double rho = 0.35;
  std::size_t train_sequences = 20000;
  PooledScorerShape shape{300, 8, 1, 16, Direction::kCausal};
  NceConfig nce{0.5, 4000, 64, 1, 10.0, 1};
  std::size_t samples = 10000;
  std::size_t proposals = 32;
  std::size_t top_k = 300;
  std::uint64_t seed = 1;

  static RepetitionConfig FromConfig(const Config& cfg);
};

struct RepetitionTask {
  RepetitionConfig cfg;
  std::shared_ptr<NGramLM> data_lm;
  std::shared_ptr<NGramLM> base_lm;
  PrefixDataset train;
};

RepetitionTask BuildRepetitionTask(const RepetitionConfig& cfg);
std::unique_ptr<PooledScorer> TrainRepetitionScorer(
    const RepetitionTask& task, std::vector<double>* curve = nullptr);

}  // namespace resebm

#endif  // RESEBM_TOY_TASK_H_
