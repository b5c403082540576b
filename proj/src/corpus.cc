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

#include "resebm/corpus.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>

namespace resebm {

TokenMode ParseTokenMode(std::string_view name) {
  if (name == "whitespace") return TokenMode::kWhitespace;
  if (name == "char") return TokenMode::kChar;
  throw std::invalid_argument("unknown token mode '" + std::string(name) +
                              "' (expected whitespace or char)");
}

std::string_view TokenModeName(TokenMode mode) {
  return mode == TokenMode::kWhitespace ? "whitespace" : "char";
}

namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
         c == '\v';
}

std::size_t Utf8Length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // stray continuation byte: keep it as its own token
}

}  // namespace

std::vector<std::string> Tokenize(std::string_view line, TokenMode mode) {
  std::vector<std::string> out;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (mode == TokenMode::kWhitespace) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && IsSpace(line[i])) ++i;
      std::size_t j = i;
      while (j < line.size() && !IsSpace(line[j])) ++j;
      if (j > i) out.emplace_back(line.substr(i, j - i));
      i = j;
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      const std::size_t n = std::min(
          Utf8Length(static_cast<unsigned char>(line[i])), line.size() - i);
      out.emplace_back(line.substr(i, n));
      i += n;
    }
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.size() < 2) {
    throw std::invalid_argument("vocabulary needs at least 2 tokens");
  }
  if (tokens_[0] != kUnknownToken) {
    throw std::invalid_argument("vocabulary id 0 must be the unknown token");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw std::invalid_argument("vocabulary contains an empty token");
    }
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("duplicate vocabulary token '" + tokens_[i] +
                                  "'");
    }
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownId : it->second;
}

Tokens Vocabulary::Encode(std::string_view text, TokenMode mode) const {
  Tokens ids;
  for (const auto& t : Tokenize(text, mode)) ids.push_back(id(t));
  return ids;
}

std::string Vocabulary::Decode(std::span<const TokenId> ids,
                               TokenMode mode) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (mode == TokenMode::kWhitespace && i > 0) out.push_back(' ');
    out += token(ids[i]);
  }
  return out;
}

void Vocabulary::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Vocabulary Vocabulary::Load(const std::filesystem::path& path) {
  return Vocabulary(ReadLines(path));
}

Vocabulary BuildVocab(const std::vector<std::string>& lines, TokenMode mode,
                      std::size_t max_size) {
  if (max_size < 2) {
    throw std::invalid_argument("max_size must be at least 2");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& line : lines) {
    for (auto& t : Tokenize(line, mode)) {
      if (t == Vocabulary::kUnknownToken) continue;
      ++counts[std::move(t)];
    }
  }
  if (counts.empty()) {
    throw std::invalid_argument("cannot build a vocabulary from an empty corpus");
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  // std::map iteration is already lexicographic; stable sort keeps it for ties.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(Vocabulary::kUnknownToken)};
  for (auto& [tok, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(std::move(tok));
  }
  return Vocabulary(std::move(tokens));
}

PrefixDataset MakePrefixDataset(std::size_t p, std::size_t T) {
  if (p >= T) {
    throw std::invalid_argument("prefix length p=" + std::to_string(p) +
                                " must be smaller than T=" + std::to_string(T));
  }
  PrefixDataset d;
  d.prefix_len = p;
  d.seq_len = T;
  d.items = SequenceBatch(T);
  return d;
}

LoadedDataset PrefixDatasetFromLines(const std::vector<std::string>& lines,
                                     const Vocabulary& vocab, std::size_t p,
                                     std::size_t T, TokenMode mode) {
  LoadedDataset out{MakePrefixDataset(p, T), 0};
  for (const auto& line : lines) {
    Tokens ids = vocab.Encode(line, mode);
    if (ids.size() < T) {
      ++out.skipped_lines;
      continue;
    }
    out.data.items.push_back(std::span<const TokenId>(ids).first(T));
  }
  if (out.data.size() == 0) {
    throw std::invalid_argument("no line has at least T=" + std::to_string(T) +
                                " tokens");
  }
  return out;
}

LoadedDataset LoadPrefixDataset(const std::filesystem::path& path,
                                const Vocabulary& vocab, std::size_t p,
                                std::size_t T, TokenMode mode) {
  return PrefixDatasetFromLines(ReadLines(path), vocab, p, T, mode);
}

std::vector<std::string> ReadLines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace resebm
