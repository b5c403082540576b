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

#include "resebm/kernels.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include "resebm/numeric.h"
#include "resebm/random.h"

namespace resebm::kernels {

namespace {

// Collects the first exception thrown inside a parallel region.
class ErrorSlot {
 public:
  template <typename F>
  void Run(F&& f) {
    try {
      f();
    } catch (...) {
#pragma omp critical(resebm_error_slot)
      if (!error_) error_ = std::current_exception();
    }
  }
  void Rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

void CheckDrawArgs(const LanguageModel& lm, std::span<const TokenId> history,
                   std::size_t T, std::size_t k) {
  if (history.size() > T) throw std::invalid_argument("history longer than T");
  if (k < 1 || k > lm.vocab_size()) {
    throw std::invalid_argument("top-k requires 1 <= k <= |V|, got k=" +
                                std::to_string(k));
  }
  CheckIds(history, lm.vocab_size());
}

Completions MakeCompletions(std::span<const TokenId> history, std::size_t T,
                            std::size_t n) {
  Completions out{SequenceBatch(T, n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(history.begin(), history.end(), out.sequences.row(i).begin());
  }
  return out;
}

}  // namespace

SamplerPool::SamplerPool(const LanguageModel& lm, std::size_t k)
    : lm_(lm), k_(k) {
  if (k < 1 || k > lm.vocab_size()) {
    throw std::invalid_argument("top-k requires 1 <= k <= |V|, got k=" +
                                std::to_string(k));
  }
}

void SamplerPool::Reserve(std::size_t threads) {
  if (samplers_.size() < threads) samplers_.resize(threads);
}

TopKSampler& SamplerPool::ForThread(std::size_t thread) {
  auto& slot = samplers_.at(thread);
  if (!slot) slot = std::make_unique<TopKSampler>(lm_, k_);
  return *slot;
}

Completions DrawCompletions(SamplerPool& pool,
                            std::span<const TokenId> history, std::size_t T,
                            std::size_t n, std::uint64_t seed) {
  CheckDrawArgs(pool.lm(), history, T, pool.k());
  Completions out = MakeCompletions(history, T, n);
  pool.Reserve(static_cast<std::size_t>(omp_get_max_threads()));
  ErrorSlot errors;
#pragma omp parallel
  {
    TopKSampler& sampler =
        pool.ForThread(static_cast<std::size_t>(omp_get_thread_num()));
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      errors.Run([&] {
        SplitMix64 rng(StreamSeed(seed, i));
        out.log_p_lm[i] =
            sampler.Complete(out.sequences.row(i), history.size(), rng);
      });
    }
  }
  errors.Rethrow();
  return out;
}

Completions DrawCompletions(const LanguageModel& lm,
                            std::span<const TokenId> history, std::size_t T,
                            std::size_t n, std::size_t k, std::uint64_t seed) {
  CheckDrawArgs(lm, history, T, k);
  SamplerPool pool(lm, k);
  return DrawCompletions(pool, history, T, n, seed);
}

std::vector<double> Energies(const EnergyModel& energy,
                             const SequenceBatch& seqs, std::size_t p) {
  std::vector<double> out(seqs.size());
  ErrorSlot errors;
  const std::size_t n = seqs.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    errors.Run([&] { out[i] = energy.Energy(seqs.row(i), p); });
  }
  errors.Rethrow();
  return out;
}

std::vector<double> SequenceLogProbs(const LanguageModel& lm,
                                     const SequenceBatch& seqs, std::size_t p) {
  std::vector<double> out(seqs.size());
  ErrorSlot errors;
  const std::size_t n = seqs.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    errors.Run([&] { out[i] = SequenceLogProb(lm, seqs.row(i), p); });
  }
  errors.Rethrow();
  return out;
}

double MeanLeaveOneOutLogMean(std::span<const double> a) {
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("leave-one-out needs n >= 2");
  const auto max_it = std::max_element(a.begin(), a.end());
  const double m = *max_it;
  if (!std::isfinite(m)) throw std::invalid_argument("non-finite log weight");
  const std::size_t argmax = static_cast<std::size_t>(max_it - a.begin());
  // Every j other than the argmax keeps the global max in its subset, so its
  // max-subtracted sum is never smaller than 1. Prefix and suffix sums of the
  // shared exp(a_i - m) give each leave-one-out sum without cancellation.
  std::vector<double> e(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(a[i] - m);
  std::vector<double> before(n + 1, 0.0);
  std::vector<double> after(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) before[i + 1] = before[i] + e[i];
  for (std::size_t i = n; i-- > 0;) after[i] = after[i + 1] + e[i];
  std::vector<double> loo(n);
  const double log_nm1 = std::log(static_cast<double>(n - 1));
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < n; ++j) {
    if (j == argmax) continue;
    loo[j] = m + std::log(before[j] + after[j + 1]) - log_nm1;
  }
  {
    double mj = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != argmax) mj = std::max(mj, a[i]);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i != argmax) s += std::exp(a[i] - mj);
    }
    loo[argmax] = mj + std::log(s) - log_nm1;
  }
  double total = 0.0;
  for (double v : loo) total += v;
  return total / static_cast<double>(n);
}

namespace serial {

Completions DrawCompletions(const LanguageModel& lm,
                            std::span<const TokenId> history, std::size_t T,
                            std::size_t n, std::size_t k, std::uint64_t seed) {
  CheckDrawArgs(lm, history, T, k);
  Completions out = MakeCompletions(history, T, n);
  TopKSampler sampler(lm, k);
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(StreamSeed(seed, i));
    out.log_p_lm[i] =
        sampler.Complete(out.sequences.row(i), history.size(), rng);
  }
  return out;
}

std::vector<double> Energies(const EnergyModel& energy,
                             const SequenceBatch& seqs, std::size_t p) {
  std::vector<double> out(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out[i] = energy.Energy(seqs.row(i), p);
  }
  return out;
}

std::vector<double> SequenceLogProbs(const LanguageModel& lm,
                                     const SequenceBatch& seqs, std::size_t p) {
  std::vector<double> out(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    out[i] = SequenceLogProb(lm, seqs.row(i), p);
  }
  return out;
}

double MeanLeaveOneOutLogMean(std::span<const double> a) {
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("leave-one-out needs n >= 2");
  std::vector<double> rest;
  rest.reserve(n - 1);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    rest.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j) rest.push_back(a[i]);
    }
    total += LogSumExp(rest) - std::log(static_cast<double>(n - 1));
  }
  return total / static_cast<double>(n);
}

}  // namespace serial

void SetThreads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int MaxThreads() { return omp_get_max_threads(); }

}  // namespace resebm::kernels
