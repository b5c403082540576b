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

#include "resebm/language_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "resebm/numeric.h"

namespace resebm {

void CheckIds(std::span<const TokenId> ids, std::size_t vocab_size) {
  for (TokenId id : ids) {
    if (id >= vocab_size) {
      throw std::out_of_range("token id " + std::to_string(id) +
                              " outside vocabulary of size " +
                              std::to_string(vocab_size));
    }
  }
}

std::vector<double> LanguageModel::NextLogProbs(
    std::span<const TokenId> history) const {
  CheckIds(history, vocab_size());
  std::vector<double> out(vocab_size());
  NextLogProbsInto(history, out);
  return out;
}

double SequenceLogProb(const LanguageModel& lm, std::span<const TokenId> seq,
                       std::size_t p) {
  if (p > seq.size()) {
    throw std::invalid_argument("prefix longer than sequence");
  }
  CheckIds(seq, lm.vocab_size());
  std::vector<double> lp(lm.vocab_size());
  double total = 0.0;
  for (std::size_t t = p; t < seq.size(); ++t) {
    lm.NextLogProbsInto(seq.first(t), lp);
    total += lp[seq[t]];
  }
  return total;
}

TopKDistribution MakeTopK(std::span<const double> log_probs, std::size_t k) {
  if (k < 1 || k > log_probs.size()) {
    throw std::invalid_argument("top-k requires 1 <= k <= |V|, got k=" +
                                std::to_string(k));
  }
  std::vector<TokenId> order(log_probs.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](TokenId a, TokenId b) {
                      if (log_probs[a] != log_probs[b]) {
                        return log_probs[a] > log_probs[b];
                      }
                      return a < b;
                    });
  TopKDistribution d;
  d.ids.assign(order.begin(), order.begin() + k);
  d.lm_log_probs.reserve(k);
  for (TokenId id : d.ids) d.lm_log_probs.push_back(log_probs[id]);
  const double top = d.lm_log_probs.front();
  d.cdf.reserve(k);
  double acc = 0.0;
  for (double lp : d.lm_log_probs) {
    acc += std::exp(lp - top);
    d.cdf.push_back(acc);
  }
  for (double& c : d.cdf) c /= acc;
  return d;
}

TopKSampler::TopKSampler(const LanguageModel& lm, std::size_t k)
    : lm_(lm), k_(k), scratch_(lm.vocab_size()) {
  if (k < 1 || k > lm.vocab_size()) {
    throw std::invalid_argument("top-k requires 1 <= k <= |V|, got k=" +
                                std::to_string(k));
  }
  // Pack a context into one integer when (|V|+1)^L fits in 63 bits.
  const double bits = static_cast<double>(lm.context_length()) *
                      std::log2(static_cast<double>(lm.vocab_size()) + 1.0);
  packed_keys_ = bits < 63.0;
}

const TopKDistribution& TopKSampler::Distribution(
    std::span<const TokenId> history) {
  const std::size_t ctx = std::min(history.size(), lm_.context_length());
  const auto context = history.last(ctx);
  if (packed_keys_) {
    std::uint64_t key = 0;
    const std::uint64_t radix = lm_.vocab_size() + 1;
    for (TokenId id : context) key = key * radix + (id + 1);
    auto it = packed_cache_.find(key);
    if (it != packed_cache_.end()) return it->second;
    lm_.NextLogProbsInto(history, scratch_);
    return packed_cache_.emplace(key, MakeTopK(scratch_, k_)).first->second;
  }
  std::string key(reinterpret_cast<const char*>(context.data()),
                  context.size() * sizeof(TokenId));
  auto it = string_cache_.find(key);
  if (it != string_cache_.end()) return it->second;
  lm_.NextLogProbsInto(history, scratch_);
  return string_cache_.emplace(std::move(key), MakeTopK(scratch_, k_))
      .first->second;
}

double TopKSampler::Complete(std::span<TokenId> seq, std::size_t from,
                             SplitMix64& rng) {
  double log_p = 0.0;
  for (std::size_t t = from; t < seq.size(); ++t) {
    const TopKDistribution& d = Distribution(seq.first(t));
    const std::size_t j = SampleFromCdf(d.cdf, rng.Uniform());
    seq[t] = d.ids[j];
    log_p += d.lm_log_probs[j];
  }
  return log_p;
}

Tokens SampleCompletionTopK(const LanguageModel& lm,
                            std::span<const TokenId> prefix, std::size_t T,
                            std::size_t k, std::uint64_t seed) {
  if (prefix.size() > T) {
    throw std::invalid_argument("prefix longer than T");
  }
  CheckIds(prefix, lm.vocab_size());
  TopKSampler sampler(lm, k);
  Tokens seq(T);
  std::copy(prefix.begin(), prefix.end(), seq.begin());
  SplitMix64 rng(seed);
  sampler.Complete(seq, prefix.size(), rng);
  return seq;
}

}  // namespace resebm
