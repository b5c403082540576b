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

#ifndef RESEBM_TYPES_H_
#define RESEBM_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace resebm {

using TokenId = std::uint32_t;
using Tokens = std::vector<TokenId>;

// Fixed-length sequences stored row-major in one buffer.
class SequenceBatch {
 public:
  SequenceBatch() = default;
  explicit SequenceBatch(std::size_t length, std::size_t count = 0)
      : length_(length), ids_(length * count) {}

  std::size_t length() const { return length_; }
  std::size_t size() const { return length_ == 0 ? 0 : ids_.size() / length_; }
  bool empty() const { return ids_.empty(); }

  std::span<TokenId> row(std::size_t i) {
    return {ids_.data() + i * length_, length_};
  }
  std::span<const TokenId> row(std::size_t i) const {
    return {ids_.data() + i * length_, length_};
  }

  void push_back(std::span<const TokenId> seq) {
    if (seq.size() != length_) {
      throw std::invalid_argument("SequenceBatch: row length mismatch");
    }
    ids_.insert(ids_.end(), seq.begin(), seq.end());
  }

  std::span<const TokenId> flat() const { return ids_; }

 private:
  std::size_t length_ = 0;
  std::vector<TokenId> ids_;
};

}  // namespace resebm

#endif  // RESEBM_TYPES_H_
