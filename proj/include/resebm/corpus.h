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

#ifndef RESEBM_CORPUS_H_
#define RESEBM_CORPUS_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "resebm/types.h"

namespace resebm {

enum class TokenMode { kWhitespace, kChar };

TokenMode ParseTokenMode(std::string_view name);
std::string_view TokenModeName(TokenMode mode);

// Splits a line into whitespace-separated words or UTF-8 code points.
std::vector<std::string> Tokenize(std::string_view line, TokenMode mode);

// Token string <-> id bijection. Id 0 is always the unknown token.
class Vocabulary {
 public:
  static constexpr TokenId kUnknownId = 0;
  static constexpr std::string_view kUnknownToken = "<unk>";

  // `tokens` must start with the unknown token and contain no duplicates.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  TokenId id(std::string_view token) const;  // kUnknownId when absent

  Tokens Encode(std::string_view text, TokenMode mode) const;
  std::string Decode(std::span<const TokenId> ids, TokenMode mode) const;

  void Save(const std::filesystem::path& path) const;
  static Vocabulary Load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens ordered by descending frequency then lexicographically, truncated
// so that the vocabulary (including the unknown token) has at most
// `max_size` entries.
Vocabulary BuildVocab(const std::vector<std::string>& lines, TokenMode mode,
                      std::size_t max_size);

// Fixed-length sequences split into a prefix of length p and a completion
// of length T - p.
struct PrefixDataset {
  std::size_t prefix_len = 0;  // p
  std::size_t seq_len = 0;     // T
  SequenceBatch items;

  std::size_t size() const { return items.size(); }
  std::size_t completion_len() const { return seq_len - prefix_len; }
  std::span<const TokenId> prefix(std::size_t i) const {
    return items.row(i).first(prefix_len);
  }
};

// Throws std::invalid_argument unless 0 <= p < T.
PrefixDataset MakePrefixDataset(std::size_t p, std::size_t T);

struct LoadedDataset {
  PrefixDataset data;
  std::size_t skipped_lines = 0;
};

// One item per line with at least T tokens (its first T tokens). Shorter
// lines are skipped and counted.
LoadedDataset PrefixDatasetFromLines(const std::vector<std::string>& lines,
                                     const Vocabulary& vocab, std::size_t p,
                                     std::size_t T, TokenMode mode);
LoadedDataset LoadPrefixDataset(const std::filesystem::path& path,
                                const Vocabulary& vocab, std::size_t p,
                                std::size_t T, TokenMode mode);

std::vector<std::string> ReadLines(const std::filesystem::path& path);

}  // namespace resebm

#endif  // RESEBM_CORPUS_H_
