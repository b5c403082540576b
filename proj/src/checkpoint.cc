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

#include "resebm/checkpoint.h"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "resebm/neural_lm.h"
#include "resebm/ngram_lm.h"
#include "resebm/ralm.h"

namespace resebm {

namespace {

std::string FormatDouble(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[noreturn]] void Corrupt(const std::string& what) {
  throw std::runtime_error("malformed checkpoint: " + what);
}

std::string ReadLine(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) Corrupt("unexpected end of file");
  return line;
}

std::uint64_t ParseUint(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    Corrupt("bad integer for " + what + ": '" + s + "'");
  }
  return v;
}

}  // namespace

void ModelRecord::Set(std::string key, std::string value) {
  metadata.emplace_back(std::move(key), std::move(value));
}
void ModelRecord::Set(std::string key, double value) {
  metadata.emplace_back(std::move(key), FormatDouble(value));
}
void ModelRecord::Set(std::string key, std::uint64_t value) {
  metadata.emplace_back(std::move(key), std::to_string(value));
}

bool ModelRecord::Has(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return true;
  }
  return false;
}

const std::string& ModelRecord::Get(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  Corrupt("missing metadata key '" + key + "'");
}

std::uint64_t ModelRecord::GetUint(const std::string& key) const {
  return ParseUint(Get(key), key);
}

double ModelRecord::GetDouble(const std::string& key) const {
  const std::string& s = Get(key);
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    Corrupt("bad number for " + key + ": '" + s + "'");
  }
  return v;
}

const std::vector<double>& ModelRecord::Block(const std::string& name) const {
  for (const auto& [n, values] : blocks) {
    if (n == name) return values;
  }
  Corrupt("missing parameter block '" + name + "'");
}

void WriteHeader(std::ostream& out,
                 const std::vector<std::pair<std::string, std::string>>& meta) {
  out.write(kMagic, 6);
  out.put(static_cast<char>(kFormatVersion));
  for (const auto& [k, v] : meta) {
    if (k.find_first_of("=\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw std::invalid_argument("metadata key/value contains '=' or newline");
    }
    out << k << '=' << v << '\n';
  }
  out << '\n';
}

std::vector<std::pair<std::string, std::string>> ReadHeader(std::istream& in) {
  char magic[7] = {};
  in.read(magic, 7);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) Corrupt("bad magic bytes");
  if (static_cast<std::uint8_t>(magic[6]) != kFormatVersion) {
    Corrupt("unsupported version " +
            std::to_string(static_cast<unsigned char>(magic[6])));
  }
  std::vector<std::pair<std::string, std::string>> meta;
  for (;;) {
    std::string line = ReadLine(in);
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) Corrupt("metadata line without '='");
    meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return meta;
}

namespace {

template <typename U>
void WriteLe(std::ostream& out, U bits) {
  char bytes[sizeof(U)];
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  out.write(bytes, sizeof(U));
}

template <typename U>
U ReadLe(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) Corrupt("truncated binary data");
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    bits |= static_cast<U>(bytes[b]) << (8 * b);
  }
  return bits;
}

}  // namespace

void WriteLittleEndian(std::ostream& out, std::span<const double> values) {
  for (double v : values) WriteLe(out, std::bit_cast<std::uint64_t>(v));
}

void WriteLittleEndian(std::ostream& out,
                       std::span<const std::uint32_t> values) {
  for (std::uint32_t v : values) WriteLe(out, v);
}

void ReadLittleEndian(std::istream& in, std::span<double> values) {
  for (double& v : values) v = std::bit_cast<double>(ReadLe<std::uint64_t>(in));
}

void ReadLittleEndian(std::istream& in, std::span<std::uint32_t> values) {
  for (std::uint32_t& v : values) v = ReadLe<std::uint32_t>(in);
}

void SaveRecord(const ModelRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteHeader(out, record.metadata);
  for (const auto& [name, values] : record.blocks) {
    out << name << '\n' << values.size() << '\n';
    WriteLittleEndian(out, values);
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

ModelRecord LoadRecord(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ModelRecord record;
  record.metadata = ReadHeader(in);
  std::string name;
  while (std::getline(in, name)) {
    const std::uint64_t count = ParseUint(ReadLine(in), "block " + name);
    std::vector<double> values(count);
    ReadLittleEndian(in, values);
    record.blocks.emplace_back(std::move(name), std::move(values));
  }
  return record;
}

namespace {

std::string ContextBlockName(const Tokens& ctx) {
  std::string name = "ctx:";
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (i) name += ',';
    name += std::to_string(ctx[i]);
  }
  return name;
}

Tokens ParseContextBlockName(const std::string& name) {
  Tokens ctx;
  std::string rest = name.substr(4);
  std::stringstream ss(rest);
  std::string part;
  while (std::getline(ss, part, ',')) {
    ctx.push_back(static_cast<TokenId>(ParseUint(part, name)));
  }
  return ctx;
}

void AppendPrefixed(ModelRecord& dst, const ModelRecord& src,
                    const std::string& prefix) {
  for (const auto& [k, v] : src.metadata) dst.Set(prefix + k, v);
  for (const auto& [n, b] : src.blocks) dst.blocks.emplace_back(prefix + n, b);
}

ModelRecord ExtractPrefixed(const ModelRecord& src, const std::string& prefix) {
  ModelRecord out;
  for (const auto& [k, v] : src.metadata) {
    if (k.rfind(prefix, 0) == 0) out.Set(k.substr(prefix.size()), v);
  }
  for (const auto& [n, b] : src.blocks) {
    if (n.rfind(prefix, 0) == 0) out.blocks.emplace_back(n.substr(prefix.size()), b);
  }
  return out;
}

void CopyBlock(const ModelRecord& r, const std::string& name,
               std::span<double> dst) {
  const auto& b = r.Block(name);
  if (b.size() != dst.size()) {
    Corrupt("block '" + name + "' has " + std::to_string(b.size()) +
            " values, expected " + std::to_string(dst.size()));
  }
  std::copy(b.begin(), b.end(), dst.begin());
}

}  // namespace

ModelRecord EncodeLanguageModel(const LanguageModel& lm) {
  ModelRecord r;
  r.Set("model_kind", lm.kind());
  r.Set("vocab_size", static_cast<std::uint64_t>(lm.vocab_size()));
  if (const auto* ng = dynamic_cast<const NGramLM*>(&lm)) {
    r.Set("order", static_cast<std::uint64_t>(ng->order()));
    r.Set("alpha", ng->alpha());
    for (const auto& [ctx, counts] : ng->counts()) {
      r.blocks.emplace_back(ContextBlockName(ctx), counts);
    }
  } else if (const auto* nn = dynamic_cast<const NeuralLM*>(&lm)) {
    const auto& s = nn->shape();
    r.Set("embed_dim", static_cast<std::uint64_t>(s.embed_dim));
    r.Set("context_window", static_cast<std::uint64_t>(s.context_window));
    r.Set("hidden_dim", static_cast<std::uint64_t>(s.hidden_dim));
    for (const auto& b : nn->blocks()) {
      const auto p = nn->params().subspan(b.offset, b.size);
      r.blocks.emplace_back(b.name, std::vector<double>(p.begin(), p.end()));
    }
  } else if (const auto* ralm = dynamic_cast<const Ralm*>(&lm)) {
    AppendPrefixed(r, EncodeLanguageModel(ralm->base()), "base.");
    AppendPrefixed(r, EncodeLanguageModel(ralm->residual()), "residual.");
  } else {
    throw std::invalid_argument("cannot serialize language model kind " +
                                lm.kind());
  }
  return r;
}

std::shared_ptr<LanguageModel> DecodeLanguageModel(const ModelRecord& r) {
  const std::string& kind = r.Get("model_kind");
  const std::size_t V = r.GetUint("vocab_size");
  if (kind == "ngram") {
    auto lm = std::make_shared<NGramLM>(V, r.GetUint("order"),
                                        r.GetDouble("alpha"));
    for (const auto& [name, counts] : r.blocks) {
      if (name.rfind("ctx:", 0) != 0) continue;
      if (counts.size() != V) Corrupt("n-gram row of wrong width");
      const Tokens ctx = ParseContextBlockName(name);
      for (std::size_t w = 0; w < V; ++w) {
        if (counts[w] != 0.0) lm->AddCount(ctx, static_cast<TokenId>(w), counts[w]);
      }
    }
    return lm;
  }
  if (kind == "neural") {
    NeuralLmShape s{V, r.GetUint("embed_dim"), r.GetUint("context_window"),
                    r.GetUint("hidden_dim")};
    auto lm = std::make_shared<NeuralLM>(s, 0);
    for (const auto& b : lm->blocks()) {
      CopyBlock(r, b.name, lm->params().subspan(b.offset, b.size));
    }
    return lm;
  }
  if (kind == "ralm") {
    auto base = DecodeLanguageModel(ExtractPrefixed(r, "base."));
    auto residual = std::dynamic_pointer_cast<NeuralLM>(
        DecodeLanguageModel(ExtractPrefixed(r, "residual.")));
    if (!residual) Corrupt("RALM residual must be a neural model");
    return std::make_shared<Ralm>(std::move(base), std::move(residual));
  }
  Corrupt("unknown language model kind '" + kind + "'");
}

ModelRecord EncodeEnergyModel(const EnergyModel& energy) {
  ModelRecord r;
  r.Set("model_kind", energy.kind());
  if (const auto* tab = dynamic_cast<const TabularEnergy*>(&energy)) {
    r.Set("vocab_size", static_cast<std::uint64_t>(tab->vocab_size()));
    r.Set("prefix_len", static_cast<std::uint64_t>(tab->prefix_len()));
    r.Set("seq_len", static_cast<std::uint64_t>(tab->seq_len()));
    std::vector<double> prefixes;
    for (const auto& p : tab->prefixes()) {
      for (TokenId id : p) prefixes.push_back(id);
    }
    r.blocks.emplace_back("prefixes", std::move(prefixes));
    const auto t = tab->params();
    r.blocks.emplace_back("table", std::vector<double>(t.begin(), t.end()));
  } else if (const auto* ps = dynamic_cast<const PooledScorer*>(&energy)) {
    const auto& s = ps->shape();
    r.Set("vocab_size", static_cast<std::uint64_t>(s.vocab_size));
    r.Set("embed_dim", static_cast<std::uint64_t>(s.embed_dim));
    r.Set("window", static_cast<std::uint64_t>(s.window));
    r.Set("hidden_dim", static_cast<std::uint64_t>(s.hidden_dim));
    r.Set("direction", std::string(DirectionName(s.direction)));
    for (const auto& b : ps->blocks()) {
      const auto p = ps->params().subspan(b.offset, b.size);
      r.blocks.emplace_back(b.name, std::vector<double>(p.begin(), p.end()));
    }
  } else if (energy.kind() == "constant") {
    r.blocks.emplace_back("value", std::vector<double>{energy.params()[0]});
  } else {
    throw std::invalid_argument("cannot serialize energy kind " + energy.kind());
  }
  return r;
}

std::unique_ptr<EnergyModel> DecodeEnergyModel(const ModelRecord& r) {
  const std::string& kind = r.Get("model_kind");
  if (kind == "constant") {
    const auto& v = r.Block("value");
    if (v.size() != 1) Corrupt("constant energy needs one value");
    return std::make_unique<ConstantEnergy>(v[0]);
  }
  if (kind == "tabular") {
    const std::size_t V = r.GetUint("vocab_size");
    const std::size_t p = r.GetUint("prefix_len");
    const std::size_t T = r.GetUint("seq_len");
    const auto& flat = r.Block("prefixes");
    if (p == 0 || flat.size() % p != 0) Corrupt("bad tabular prefix block");
    std::vector<Tokens> prefixes;
    for (std::size_t i = 0; i < flat.size(); i += p) {
      Tokens prefix;
      for (std::size_t j = 0; j < p; ++j) {
        prefix.push_back(static_cast<TokenId>(flat[i + j]));
      }
      prefixes.push_back(std::move(prefix));
    }
    auto e = std::make_unique<TabularEnergy>(V, p, T, prefixes);
    CopyBlock(r, "table", e->params());
    return e;
  }
  if (kind == "pooled") {
    PooledScorerShape s{r.GetUint("vocab_size"), r.GetUint("embed_dim"),
                        r.GetUint("window"), r.GetUint("hidden_dim"),
                        ParseDirection(r.Get("direction"))};
    auto e = std::make_unique<PooledScorer>(s, 0);
    for (const auto& b : e->blocks()) {
      CopyBlock(r, b.name, e->params().subspan(b.offset, b.size));
    }
    return e;
  }
  Corrupt("unknown energy kind '" + kind + "'");
}

void SaveLanguageModel(const LanguageModel& lm, std::uint64_t seed,
                       const std::filesystem::path& path) {
  ModelRecord r = EncodeLanguageModel(lm);
  r.Set("seed", seed);
  SaveRecord(r, path);
}

std::shared_ptr<LanguageModel> LoadLanguageModel(
    const std::filesystem::path& path) {
  return DecodeLanguageModel(LoadRecord(path));
}

void SaveEnergyModel(const EnergyModel& energy, std::uint64_t seed,
                     const std::filesystem::path& path) {
  ModelRecord r = EncodeEnergyModel(energy);
  r.Set("seed", seed);
  SaveRecord(r, path);
}

std::unique_ptr<EnergyModel> LoadEnergyModel(
    const std::filesystem::path& path) {
  return DecodeEnergyModel(LoadRecord(path));
}

}  // namespace resebm
