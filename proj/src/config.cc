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

#include "resebm/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace resebm {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t ParseUint(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

}  // namespace

Config Config::Parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    if (eq == std::string::npos) {
      throw ConfigError(where, "expected 'key = value', got '" + line + "'");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where, "empty key");
    if (!cfg.values_.emplace(key, Trim(line.substr(eq + 1))).second) {
      throw ConfigError(key, "duplicate key at " + where);
    }
  }
  return cfg;
}

Config Config::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  return Parse(in, path.string());
}

void Config::Set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

bool Config::Has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::GetString(const std::string& key,
                              const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::RequireString(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw ConfigError(key, "required but not set");
  }
  return it->second;
}

std::uint64_t Config::GetUint(const std::string& key, std::uint64_t fallback,
                              std::uint64_t min) const {
  const auto it = values_.find(key);
  const std::uint64_t v =
      it == values_.end() ? fallback : ParseUint(key, it->second);
  if (v < min) {
    throw ConfigError(key, "must be at least " + std::to_string(min) +
                               ", got " + std::to_string(v));
  }
  return v;
}

double Config::GetDouble(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() ||
      !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite real number, got '" + s + "'");
  }
  return v;
}

double Config::GetPositive(const std::string& key, double fallback) const {
  const double v = GetDouble(key, fallback);
  if (!(v > 0.0)) {
    throw ConfigError(key, "must be positive, got " + GetString(key, "default"));
  }
  return v;
}

std::vector<std::size_t> Config::GetUintList(
    const std::string& key, const std::vector<std::size_t>& fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<std::size_t> out;
  std::stringstream ss(it->second);
  std::string part;
  while (std::getline(ss, part, ',')) out.push_back(ParseUint(key, Trim(part)));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

}  // namespace resebm
