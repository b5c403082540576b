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

#ifndef RESEBM_TRAINING_H_
#define RESEBM_TRAINING_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "resebm/corpus.h"
#include "resebm/energy.h"
#include "resebm/language_model.h"

namespace resebm {

// m base-LM completions per dataset item, stored without the prefix.
struct NegativeSet {
  std::size_t vocab_size = 0;
  std::size_t prefix_len = 0;
  std::size_t seq_len = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t items = 0;
  std::vector<TokenId> ids;  // items * m * (seq_len - prefix_len)

  std::size_t completion_len() const { return seq_len - prefix_len; }
  std::span<const TokenId> completion(std::size_t item, std::size_t j) const {
    const std::size_t L = completion_len();
    return {ids.data() + (item * m + j) * L, L};
  }
};

// Completion j of item i uses stream StreamSeed(StreamSeed(seed, i), j).
NegativeSet PregenerateNegatives(const LanguageModel& lm,
                                 const PrefixDataset& data, std::size_t m,
                                 std::size_t k, std::uint64_t seed);

void SaveNegatives(const NegativeSet& negs, const std::filesystem::path& path);
NegativeSet LoadNegatives(const std::filesystem::path& path);

// mean softplus(E_pos) + mean softplus(-E_neg).
double NceLoss(std::span<const double> e_pos, std::span<const double> e_neg);

// Writes dloss/dE for every input energy.
void NceLossGrad(std::span<const double> e_pos, std::span<const double> e_neg,
                 std::span<double> d_pos, std::span<double> d_neg);

struct NceConfig {
  double lr = 0.1;
  std::size_t steps = 1000;
  std::size_t batch = 32;
  std::size_t negatives_per_positive = 1;
  double clip_norm = 10.0;
  std::uint64_t seed = 1;
};

class NonFiniteLossError : public std::runtime_error {
 public:
  NonFiniteLossError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

// Plain SGD on NceLoss. On a non-finite loss the energy is restored to the
// parameters of the last finite step and NonFiniteLossError is thrown.
std::vector<double> TrainEnergyNce(EnergyModel& energy,
                                   const PrefixDataset& data,
                                   const NegativeSet& negs,
                                   const NceConfig& cfg);

}  // namespace resebm

#endif  // RESEBM_TRAINING_H_
