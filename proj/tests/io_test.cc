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

#include <doctest.h>

#include <sstream>

#include "resebm/checkpoint.h"
#include "resebm/config.h"
#include "resebm/energy.h"
#include "resebm/neural_lm.h"
#include "resebm/ngram_lm.h"
#include "resebm/ralm.h"
#include "test_util.h"

using namespace resebm;

namespace {

SequenceBatch SmallCorpus() {
  SequenceBatch b(4);
  b.push_back(Tokens{0, 1, 2, 1});
  b.push_back(Tokens{1, 2, 1, 0});
  b.push_back(Tokens{2, 2, 3, 1});
  return b;
}

void ExpectSamePredictions(const LanguageModel& a, const LanguageModel& b) {
  REQUIRE(a.vocab_size() == b.vocab_size());
  CHECK(a.kind() == b.kind());
  for (const Tokens& h : {Tokens{}, Tokens{1}, Tokens{2, 3}, Tokens{0, 1, 2}}) {
    CHECK(a.NextLogProbs(h) == b.NextLogProbs(h));
  }
}

void ExpectSameEnergies(const EnergyModel& a, const EnergyModel& b) {
  CHECK(a.kind() == b.kind());
  for (const Tokens& x : {Tokens{0, 1, 2, 3}, Tokens{1, 1, 3, 0}, Tokens{2, 3, 0, 0}}) {
    CHECK(a.Energy(x, 2) == b.Energy(x, 2));
  }
}

}  // namespace

TEST_CASE("checkpoint header layout") {
  const auto dir = testing::ScratchDir("ckpt_header");
  const NGramLM lm = FitNGram(SmallCorpus(), 4, 2, 0.5);
  SaveLanguageModel(lm, 17, dir / "lm.bin");
  const std::string bytes = testing::ReadFile(dir / "lm.bin");
  REQUIRE(bytes.size() > 8);
  CHECK(bytes.substr(0, 6) == "RESEBM");
  CHECK(static_cast<unsigned char>(bytes[6]) == 0x01);
  const std::size_t end = bytes.find("\n\n");
  REQUIRE(end != std::string::npos);
  const std::string meta = bytes.substr(7, end - 7);
  CHECK(meta.find("model_kind=ngram") != std::string::npos);
  CHECK(meta.find("vocab_size=4") != std::string::npos);
  CHECK(meta.find("seed=17") != std::string::npos);
}

TEST_CASE("little-endian blocks round trip") {
  std::stringstream s;
  const std::vector<double> values{0.0, -1.5, 1e-300, 3.141592653589793};
  WriteLittleEndian(s, values);
  CHECK(s.str().size() == 32);
  // 1.0 is 0x3FF0000000000000, stored low byte first.
  std::stringstream one;
  WriteLittleEndian(one, std::vector<double>{1.0});
  CHECK(one.str() == std::string("\0\0\0\0\0\0\xf0\x3f", 8));
  std::vector<double> back(4);
  ReadLittleEndian(s, back);
  CHECK(back == values);
  std::stringstream ids;
  const std::vector<std::uint32_t> raw{1, 0x01020304};
  WriteLittleEndian(ids, raw);
  CHECK(ids.str() == std::string("\x01\0\0\0\x04\x03\x02\x01", 8));
}

TEST_CASE("language models survive a save and load") {
  const auto dir = testing::ScratchDir("ckpt_lm");
  const NGramLM ngram = FitNGram(SmallCorpus(), 4, 3, 0.25);
  SaveLanguageModel(ngram, 1, dir / "ngram.bin");
  ExpectSamePredictions(ngram, *LoadLanguageModel(dir / "ngram.bin"));

  NeuralLM neural({4, 3, 2, 5}, 2, 0.7);
  for (double& w : neural.params()) w += 0.01;
  SaveLanguageModel(neural, 2, dir / "neural.bin");
  ExpectSamePredictions(neural, *LoadLanguageModel(dir / "neural.bin"));

  auto residual = std::make_shared<NeuralLM>(NeuralLmShape{4, 2, 1, 3}, 3, 0.5);
  for (double& w : residual->params()) w += 0.02;
  const Ralm ralm(std::make_shared<NGramLM>(ngram), residual);
  SaveLanguageModel(ralm, 3, dir / "ralm.bin");
  ExpectSamePredictions(ralm, *LoadLanguageModel(dir / "ralm.bin"));
}

TEST_CASE("energy models survive a save and load") {
  const auto dir = testing::ScratchDir("ckpt_energy");
  const ConstantEnergy constant(2.5);
  SaveEnergyModel(constant, 1, dir / "c.bin");
  ExpectSameEnergies(constant, *LoadEnergyModel(dir / "c.bin"));

  TabularEnergy tabular(4, 2, 4, {Tokens{0, 1}, Tokens{2, 3}, Tokens{1, 1}}, 16);
  for (std::size_t i = 0; i < tabular.num_params(); ++i) tabular.params()[i] = 0.1 * i;
  SaveEnergyModel(tabular, 2, dir / "t.bin");
  ExpectSameEnergies(tabular, *LoadEnergyModel(dir / "t.bin"));

  PooledScorer pooled({4, 3, 1, 5, Direction::kCausal}, 3, 0.6);
  for (double& w : pooled.params()) w += 0.05;
  SaveEnergyModel(pooled, 3, dir / "p.bin");
  ExpectSameEnergies(pooled, *LoadEnergyModel(dir / "p.bin"));
}

TEST_CASE("malformed checkpoints are rejected") {
  const auto dir = testing::ScratchDir("ckpt_bad");
  const NGramLM lm = FitNGram(SmallCorpus(), 4, 2, 0.5);
  SaveLanguageModel(lm, 1, dir / "good.bin");
  const std::string good = testing::ReadFile(dir / "good.bin");

  testing::WriteFile(dir / "magic.bin", "XESEBM" + good.substr(6));
  CHECK_THROWS(LoadLanguageModel(dir / "magic.bin"));
  std::string version = good;
  version[6] = 0x02;
  testing::WriteFile(dir / "version.bin", version);
  CHECK_THROWS(LoadLanguageModel(dir / "version.bin"));
  testing::WriteFile(dir / "short.bin", good.substr(0, good.size() - 3));
  CHECK_THROWS(LoadLanguageModel(dir / "short.bin"));
  testing::WriteFile(dir / "empty.bin", "");
  CHECK_THROWS(LoadLanguageModel(dir / "empty.bin"));
  CHECK_THROWS(LoadLanguageModel(dir / "missing.bin"));
  // An LM checkpoint is not an energy checkpoint.
  CHECK_THROWS(LoadEnergyModel(dir / "good.bin"));
}

TEST_CASE("config parsing") {
  std::istringstream in(
      "# comment\n"
      "seed = 7\n"
      "  lr=0.25   # trailing comment\n"
      "\n"
      "name = toy corpus\n"
      "sizes = 8, 64,512\n");
  const Config cfg = Config::Parse(in, "inline");
  CHECK(cfg.GetUint("seed", 0) == 7);
  CHECK(cfg.GetDouble("lr", 0.0) == 0.25);
  CHECK(cfg.GetString("name", "") == "toy corpus");
  CHECK(cfg.GetUintList("sizes", {}) == std::vector<std::size_t>{8, 64, 512});
  CHECK(cfg.GetUint("absent", 3) == 3);
  CHECK_FALSE(cfg.Has("absent"));
  CHECK_THROWS_AS(cfg.RequireString("absent"), ConfigError);
}

TEST_CASE("config errors name the field") {
  std::istringstream bad_line("seed 7\n");
  CHECK_THROWS_AS(Config::Parse(bad_line, "inline"), ConfigError);
  std::istringstream values("seed = -1\nlr = abc\nk = 0\nrate = 0\n");
  const Config cfg = Config::Parse(values, "inline");
  try {
    cfg.GetUint("seed", 0);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "seed");
  }
  CHECK_THROWS_AS(cfg.GetDouble("lr", 0.0), ConfigError);
  CHECK_THROWS_AS(cfg.GetUint("k", 5, 1), ConfigError);
  CHECK_THROWS_AS(cfg.GetPositive("rate", 1.0), ConfigError);
  std::istringstream dup("a = 1\na = 2\n");
  CHECK_THROWS_AS(Config::Parse(dup, "inline"), ConfigError);
  CHECK_THROWS_AS(Config::Load("/nonexistent/resebm.cfg"), ConfigError);
}

TEST_CASE("bundled toy config loads") {
  const Config cfg = Config::Load(RESEBM_TOY_CONFIG);
  CHECK(cfg.GetUint("vocab_size", 0) == 6);
  CHECK(cfg.GetUint("prefix_len", 0) == 2);
  CHECK(cfg.GetUint("seq_len", 0) == 5);
  CHECK(cfg.GetUint("enum_cap", 0) == 216);
}
