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

#include "resebm/estimation.h"

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "resebm/kernels.h"
#include "resebm/numeric.h"

namespace resebm {

namespace {

std::vector<double> Negated(std::span<const double> energies) {
  std::vector<double> out(energies.size());
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (!std::isfinite(energies[i])) {
      throw std::invalid_argument("non-finite energy at index " +
                                  std::to_string(i));
    }
    out[i] = -energies[i];
  }
  return out;
}

// FNV-1a over token ids; stable across platforms.
std::uint64_t HashTokens(std::span<const TokenId> ids) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (TokenId id : ids) {
    for (int b = 0; b < 4; ++b) {
      h ^= (id >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void CheckSequence(const LanguageModel& lm, std::span<const TokenId> x,
                   std::size_t p) {
  if (p >= x.size()) {
    throw std::invalid_argument("prefix length " + std::to_string(p) +
                                " must be below sequence length " +
                                std::to_string(x.size()));
  }
  CheckIds(x, lm.vocab_size());
}

}  // namespace

double LogPartitionLower(std::span<const double> energies) {
  if (energies.empty()) throw std::invalid_argument("empty energy list");
  const std::vector<double> w = Negated(energies);
  return LogSumExp(w) - std::log(static_cast<double>(w.size()));
}

double LogPartitionUpper(std::span<const double> energies) {
  return LogPartitionBounds(energies).upper;
}

LogZBounds LogPartitionBounds(std::span<const double> energies) {
  const std::size_t n = energies.size();
  if (n < 2) throw std::invalid_argument("upper estimator needs n >= 2");
  const std::vector<double> w = Negated(energies);
  const double tn = LogSumExp(w) - std::log(static_cast<double>(n));
  const double loo = kernels::MeanLeaveOneOutLogMean(w);
  const double dn = static_cast<double>(n);
  return {tn, (2.0 * dn - 1.0) * tn - 2.0 * (dn - 1.0) * loo, n};
}

LogZBounds EstimateLogPartition(const LanguageModel& lm,
                                const EnergyModel& energy,
                                std::span<const TokenId> history,
                                std::size_t p, std::size_t T, std::size_t n,
                                std::uint64_t seed) {
  if (history.size() > T || history.size() < p) {
    throw std::invalid_argument("history length must lie in [p, T]");
  }
  if (history.size() == T) {
    // A single completion: the expectation is exact.
    const double e = energy.Energy(history, p);
    return {-e, -e, n};
  }
  const kernels::Completions draws =
      kernels::DrawCompletions(lm, history, T, n, lm.vocab_size(), seed);
  const std::vector<double> e = kernels::Energies(energy, draws.sequences, p);
  return LogPartitionBounds(e);
}

LogProbInterval JointLogProbBounds(const LanguageModel& lm,
                                   const EnergyModel& energy,
                                   std::span<const TokenId> x, std::size_t p,
                                   std::size_t n, std::uint64_t seed) {
  CheckSequence(lm, x, p);
  const double s = SequenceLogProb(lm, x, p) - energy.Energy(x, p);
  const LogZBounds z =
      EstimateLogPartition(lm, energy, x.first(p), p, x.size(), n, seed);
  return {s - z.upper, s - z.lower};
}

PplBounds EstimatePplBounds(const LanguageModel& lm, const EnergyModel& energy,
                            const PrefixDataset& data, std::size_t n,
                            std::uint64_t seed) {
  if (data.items.empty()) throw std::invalid_argument("empty dataset");
  const std::size_t p = data.prefix_len;
  const std::size_t T = data.seq_len;
  std::map<Tokens, LogZBounds> cache;
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    const auto x = data.items.row(i);
    CheckSequence(lm, x, p);
    Tokens prefix(x.begin(), x.begin() + p);
    auto it = cache.find(prefix);
    if (it == cache.end()) {
      const LogZBounds z = EstimateLogPartition(
          lm, energy, prefix, p, T, n, StreamSeed(seed, HashTokens(prefix)));
      it = cache.emplace(std::move(prefix), z).first;
    }
    const double s = SequenceLogProb(lm, x, p) - energy.Energy(x, p);
    lo += s - it->second.upper;
    hi += s - it->second.lower;
  }
  const std::size_t tokens = data.items.size() * (T - p);
  const double dt = static_cast<double>(tokens);
  return {std::exp(-hi / dt), std::exp(-lo / dt), tokens, n};
}

double ExactLmPpl(const LanguageModel& lm, const PrefixDataset& data) {
  if (data.items.empty()) throw std::invalid_argument("empty dataset");
  const std::vector<double> lp =
      kernels::SequenceLogProbs(lm, data.items, data.prefix_len);
  double total = 0.0;
  for (double v : lp) total += v;
  const double tokens =
      static_cast<double>(data.items.size() * (data.seq_len - data.prefix_len));
  return std::exp(-total / tokens);
}

std::vector<double> ExactLastStepLogProbs(const LanguageModel& lm,
                                          const EnergyModel& energy,
                                          std::span<const TokenId> x_prefix,
                                          std::size_t p) {
  if (x_prefix.size() < p) {
    throw std::invalid_argument("conditioning history shorter than prefix");
  }
  std::vector<double> scores = lm.NextLogProbs(x_prefix);
  Tokens seq(x_prefix.begin(), x_prefix.end());
  seq.push_back(0);
  for (std::size_t v = 0; v < scores.size(); ++v) {
    seq.back() = static_cast<TokenId>(v);
    scores[v] -= energy.Energy(seq, p);
  }
  LogSoftmaxInPlace(scores);
  return scores;
}

StepProbBounds StepConditionalBounds(const LanguageModel& lm,
                                     const EnergyModel& energy,
                                     std::span<const TokenId> x_prefix,
                                     TokenId token, std::size_t p,
                                     std::size_t T, std::size_t n,
                                     std::uint64_t seed) {
  if (x_prefix.size() < p || x_prefix.size() >= T) {
    throw std::invalid_argument("need p <= t-1 < T, got t-1 = " +
                                std::to_string(x_prefix.size()));
  }
  if (token >= lm.vocab_size()) {
    throw std::out_of_range("token id " + std::to_string(token) +
                            " outside vocabulary");
  }
  StepProbBounds out;
  out.token = token;
  out.t = x_prefix.size() + 1;
  out.n = n;
  if (x_prefix.size() + 1 == T) {
    const double v = ExactLastStepLogProbs(lm, energy, x_prefix, p)[token];
    out.lower = out.upper = v;
    out.exact = true;
  } else {
    const double lp = lm.NextLogProbs(x_prefix)[token];
    Tokens extended(x_prefix.begin(), x_prefix.end());
    extended.push_back(token);
    const LogZBounds num = EstimateLogPartition(lm, energy, extended, p, T, n,
                                                StreamSeed(seed, 0));
    const LogZBounds den = EstimateLogPartition(lm, energy, x_prefix, p, T, n,
                                                StreamSeed(seed, 1));
    out.lower = lp + num.lower - den.upper;
    out.upper = lp + num.upper - den.lower;
  }
  out.exceeds_zero = out.upper > 0.0 || out.lower > 0.0;
  return out;
}

// ---- Exact enumeration ----------------------------------------------------

namespace {

std::size_t CountCompletions(std::size_t V, std::size_t len, std::size_t cap) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < len; ++i) {
    if (total > cap / V) {
      throw std::invalid_argument(
          "enumeration of " + std::to_string(V) + "^" + std::to_string(len) +
          " completions exceeds cap " + std::to_string(cap));
    }
    total *= V;
  }
  if (total > cap) {
    throw std::invalid_argument("enumeration exceeds cap " +
                                std::to_string(cap));
  }
  return total;
}

void Enumerate(const LanguageModel& lm, Tokens& seq, std::size_t T,
               double log_p, Enumeration& out) {
  if (seq.size() == T) {
    out.sequences.push_back(seq);
    out.log_p_lm.push_back(log_p);
    return;
  }
  const std::vector<double> lp = lm.NextLogProbs(seq);
  for (std::size_t v = 0; v < lp.size(); ++v) {
    seq.push_back(static_cast<TokenId>(v));
    Enumerate(lm, seq, T, log_p + lp[v], out);
    seq.pop_back();
  }
}

}  // namespace

Enumeration EnumerateCompletions(const LanguageModel& lm,
                                 std::span<const TokenId> history,
                                 std::size_t T, std::size_t cap) {
  if (history.size() > T) {
    throw std::invalid_argument("history longer than T");
  }
  CheckIds(history, lm.vocab_size());
  const std::size_t total =
      CountCompletions(lm.vocab_size(), T - history.size(), cap);
  Enumeration out{SequenceBatch(T, 0), {}};
  out.log_p_lm.reserve(total);
  Tokens seq(history.begin(), history.end());
  Enumerate(lm, seq, T, 0.0, out);
  return out;
}

std::size_t CompletionCode(std::span<const TokenId> completion,
                           std::size_t vocab_size) {
  std::size_t code = 0;
  for (TokenId id : completion) code = code * vocab_size + id;
  return code;
}

Tokens DecodeCompletion(std::size_t code, std::size_t length,
                        std::size_t vocab_size) {
  Tokens out(length);
  for (std::size_t i = length; i-- > 0;) {
    out[i] = static_cast<TokenId>(code % vocab_size);
    code /= vocab_size;
  }
  return out;
}

namespace {

std::vector<double> JointScores(const LanguageModel& lm,
                                const EnergyModel& energy,
                                std::span<const TokenId> history,
                                std::size_t p, std::size_t T,
                                std::size_t cap, Enumeration* keep = nullptr) {
  Enumeration all = EnumerateCompletions(lm, history, T, cap);
  const std::vector<double> e = kernels::Energies(energy, all.sequences, p);
  std::vector<double> scores(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) scores[i] = all.log_p_lm[i] - e[i];
  if (keep) *keep = std::move(all);
  return scores;
}

}  // namespace

double ExactLogPartition(const LanguageModel& lm, const EnergyModel& energy,
                         std::span<const TokenId> prefix, std::size_t T,
                         std::size_t cap) {
  const std::vector<double> scores =
      JointScores(lm, energy, prefix, prefix.size(), T, cap);
  return LogSumExp(scores);
}

std::vector<double> ExactJointDistribution(const LanguageModel& lm,
                                           const EnergyModel& energy,
                                           std::span<const TokenId> prefix,
                                           std::size_t T, std::size_t cap) {
  return Softmax(JointScores(lm, energy, prefix, prefix.size(), T, cap));
}

double ExactStepLogProb(const LanguageModel& lm, const EnergyModel& energy,
                        std::span<const TokenId> x_prefix, TokenId token,
                        std::size_t p, std::size_t T, std::size_t cap) {
  if (x_prefix.size() < p || x_prefix.size() >= T) {
    throw std::invalid_argument("need p <= t-1 < T");
  }
  Enumeration all;
  const std::vector<double> scores =
      JointScores(lm, energy, x_prefix, p, T, cap, &all);
  std::vector<double> match;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (all.sequences.row(i)[x_prefix.size()] == token) {
      match.push_back(scores[i]);
    }
  }
  return LogSumExp(match) - LogSumExp(scores);
}

}  // namespace resebm
