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

#include "resebm/ngram_lm.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace resebm {

namespace {

std::string Key(std::span<const TokenId> context) {
  return std::string(reinterpret_cast<const char*>(context.data()),
                     context.size() * sizeof(TokenId));
}

}  // namespace

NGramLM::NGramLM(std::size_t vocab_size, std::size_t order, double alpha)
    : vocab_size_(vocab_size), order_(order), alpha_(alpha) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("n-gram alpha must be finite and > 0");
  }
  if (vocab_size < 2) throw std::invalid_argument("|V| must be >= 2");
}

const NGramLM::Row* NGramLM::FindRow(std::span<const TokenId> context) const {
  auto it = rows_.find(Key(context));
  return it == rows_.end() ? nullptr : &it->second;
}

void NGramLM::NextLogProbsInto(std::span<const TokenId> history,
                               std::span<double> out) const {
  const std::size_t ctx = std::min(history.size(), order_ - 1);
  const Row* row = FindRow(history.last(ctx));
  const double v = static_cast<double>(vocab_size_);
  if (row == nullptr) {
    const double lp = -std::log(v);
    for (double& x : out) x = lp;
    return;
  }
  const double log_denom = std::log(row->total + alpha_ * v);
  for (std::size_t w = 0; w < vocab_size_; ++w) {
    out[w] = std::log(row->counts[w] + alpha_) - log_denom;
  }
}

void NGramLM::AddCount(std::span<const TokenId> context, TokenId next,
                       double count) {
  if (context.size() > order_ - 1) {
    throw std::invalid_argument("context longer than order-1");
  }
  CheckIds(context, vocab_size_);
  if (next >= vocab_size_) throw std::out_of_range("token id out of range");
  if (!(count >= 0.0) || !std::isfinite(count)) {
    throw std::invalid_argument("n-gram counts must be finite and >= 0");
  }
  Row& row = rows_[Key(context)];
  if (row.counts.empty()) row.counts.assign(vocab_size_, 0.0);
  row.counts[next] += count;
  row.total += count;
  auto& stored = counts_[Tokens(context.begin(), context.end())];
  if (stored.empty()) stored.assign(vocab_size_, 0.0);
  stored[next] += count;
}

void NGramLM::AddSequence(std::span<const TokenId> seq) {
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const std::size_t ctx = std::min(t, order_ - 1);
    AddCount(seq.subspan(t - ctx, ctx), seq[t], 1.0);
  }
}

double NGramLM::Count(std::span<const TokenId> context, TokenId next) const {
  const Row* row = FindRow(context);
  return row == nullptr ? 0.0 : row->counts.at(next);
}

NGramLM FitNGram(const SequenceBatch& sequences, std::size_t vocab_size,
                 std::size_t order, double alpha) {
  if (sequences.empty()) {
    throw std::invalid_argument("cannot fit an n-gram model on empty data");
  }
  NGramLM lm(vocab_size, order, alpha);
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    lm.AddSequence(sequences.row(i));
  }
  return lm;
}

}  // namespace resebm
