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

#ifndef RESEBM_CHECKPOINT_H_
#define RESEBM_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resebm/energy.h"
#include "resebm/language_model.h"

namespace resebm {

// Checkpoint layout:
//   "RESEBM" 0x01
//   key=value lines (UTF-8), terminated by an empty line
//   blocks: "<name>\n<count>\n" followed by count little-endian float64
inline constexpr char kMagic[] = "RESEBM";
inline constexpr std::uint8_t kFormatVersion = 0x01;

struct ModelRecord {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::pair<std::string, std::vector<double>>> blocks;

  void Set(std::string key, std::string value);
  void Set(std::string key, double value);
  void Set(std::string key, std::uint64_t value);
  const std::string& Get(const std::string& key) const;  // throws if absent
  std::uint64_t GetUint(const std::string& key) const;
  double GetDouble(const std::string& key) const;
  bool Has(const std::string& key) const;
  const std::vector<double>& Block(const std::string& name) const;
};

// Header helpers shared with other binary files (negative sets).
void WriteHeader(std::ostream& out,
                 const std::vector<std::pair<std::string, std::string>>& meta);
std::vector<std::pair<std::string, std::string>> ReadHeader(std::istream& in);

void WriteLittleEndian(std::ostream& out, std::span<const double> values);
void WriteLittleEndian(std::ostream& out, std::span<const std::uint32_t> values);
void ReadLittleEndian(std::istream& in, std::span<double> values);
void ReadLittleEndian(std::istream& in, std::span<std::uint32_t> values);

void SaveRecord(const ModelRecord& record, const std::filesystem::path& path);
ModelRecord LoadRecord(const std::filesystem::path& path);

// Supported kinds: ngram, neural, ralm (language models); constant,
// tabular, pooled (energies).
ModelRecord EncodeLanguageModel(const LanguageModel& lm);
std::shared_ptr<LanguageModel> DecodeLanguageModel(const ModelRecord& record);
ModelRecord EncodeEnergyModel(const EnergyModel& energy);
std::unique_ptr<EnergyModel> DecodeEnergyModel(const ModelRecord& record);

void SaveLanguageModel(const LanguageModel& lm, std::uint64_t seed,
                       const std::filesystem::path& path);
std::shared_ptr<LanguageModel> LoadLanguageModel(
    const std::filesystem::path& path);
void SaveEnergyModel(const EnergyModel& energy, std::uint64_t seed,
                     const std::filesystem::path& path);
std::unique_ptr<EnergyModel> LoadEnergyModel(const std::filesystem::path& path);

}  // namespace resebm

#endif  // RESEBM_CHECKPOINT_H_
