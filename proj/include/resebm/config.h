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

#ifndef RESEBM_CONFIG_H_
#define RESEBM_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace resebm {

// Invalid configuration; names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error("config field '" + field + "': " + what),
        field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Flat `key = value` settings. Lines starting with '#' and blank lines are
// ignored; a '#' after the value starts a comment.
class Config {
 public:
  static Config Parse(std::istream& in, const std::string& source);
  static Config Load(const std::filesystem::path& path);

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string GetString(const std::string& key, const std::string& fallback) const;
  std::string RequireString(const std::string& key) const;
  std::uint64_t GetUint(const std::string& key, std::uint64_t fallback,
                        std::uint64_t min = 0) const;
  double GetDouble(const std::string& key, double fallback) const;
  // Strictly positive, finite real.
  double GetPositive(const std::string& key, double fallback) const;
  // Comma-separated unsigned integers.
  std::vector<std::size_t> GetUintList(const std::string& key,
                                       const std::vector<std::size_t>& fallback) const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace resebm

#endif  // RESEBM_CONFIG_H_
