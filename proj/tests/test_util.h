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

#ifndef RESEBM_TESTS_TEST_UTIL_H_
#define RESEBM_TESTS_TEST_UTIL_H_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "resebm/estimation.h"
#include "resebm/language_model.h"
#include "resebm/toy_task.h"

namespace resebm::testing {

// History-independent LM with a fixed next-token distribution.
class FixedLM : public LanguageModel {
 public:
  explicit FixedLM(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::size_t vocab_size() const override { return probs_.size(); }
  std::size_t context_length() const override { return 0; }
  std::string kind() const override { return "fixed"; }
  void NextLogProbsInto(std::span<const TokenId>,
                        std::span<double> out) const override {
    for (std::size_t i = 0; i < probs_.size(); ++i) out[i] = std::log(probs_[i]);
  }

 private:
  std::vector<double> probs_;
};

inline FixedLM UniformLM(std::size_t V) {
  return FixedLM(std::vector<double>(V, 1.0 / static_cast<double>(V)));
}

// Fresh scratch directory under the system temp path.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("resebm_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Tabular energy at the NCE optimum, in closed form: E = log P_LM - log P_data.
inline TabularEnergy OptimalToyEnergy(const ToyTask& task) {
  const std::size_t p = task.cfg.prefix_len;
  const std::size_t T = task.cfg.seq_len;
  const std::size_t cap = task.cfg.enum_cap;
  TabularEnergy e(task.cfg.vocab_size, p, T, task.prefixes, cap);
  for (std::size_t i = 0; i < task.prefixes.size(); ++i) {
    const auto data = ToyDataDistribution(task, task.prefixes[i]);
    const Enumeration en = EnumerateCompletions(*task.base_lm, task.prefixes[i], T, cap);
    for (std::size_t c = 0; c < data.size(); ++c) {
      e.params()[i * cap + c] = en.log_p_lm[c] - std::log(data[c]);
    }
  }
  return e;
}

}  // namespace resebm::testing

#endif  // RESEBM_TESTS_TEST_UTIL_H_
