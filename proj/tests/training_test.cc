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

#include <random>

#include "resebm/estimation.h"
#include "resebm/kernels.h"
#include "resebm/numeric.h"
#include "resebm/toy_task.h"
#include "resebm/training.h"
#include "test_util.h"

using namespace resebm;
using doctest::Approx;

namespace {

PrefixDataset RandomData(std::mt19937_64& rng, std::size_t n, std::size_t p,
                         std::size_t T, std::size_t V) {
  PrefixDataset d = MakePrefixDataset(p, T);
  Tokens x(T);
  for (std::size_t i = 0; i < n; ++i) {
    for (TokenId& t : x) t = static_cast<TokenId>(rng() % V);
    d.items.push_back(x);
  }
  return d;
}

double TailMean(const std::vector<double>& curve, std::size_t last) {
  double s = 0.0;
  for (std::size_t i = curve.size() - last; i < curve.size(); ++i) s += curve[i];
  return s / static_cast<double>(last);
}

}  // namespace

TEST_CASE("nce_loss closed forms") {
  const std::vector<double> zero{0.0};
  CHECK(NceLoss(zero, zero) == Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  const std::vector<double> pos{-10.0};
  const std::vector<double> neg{10.0};
  CHECK(NceLoss(pos, neg) == Approx(2.0 * std::log1p(std::exp(-10.0))).epsilon(1e-12));
  CHECK(NceLoss(pos, neg) == Approx(9.0797e-5).epsilon(1e-4));
  std::vector<double> dp(1), dn(1);
  NceLossGrad(zero, zero, dp, dn);
  CHECK(dp[0] == 0.5);
  CHECK(dn[0] == -0.5);
}

TEST_CASE("nce_loss is stable for large energies and rejects non-finite input") {
  const std::vector<double> pos{800.0, -800.0};
  const std::vector<double> neg{-900.0};
  CHECK(NceLoss(pos, neg) == Approx((800.0 + 0.0) / 2.0 + 900.0));
  const std::vector<double> bad{std::nan("")};
  CHECK_THROWS(NceLoss(bad, neg));
}

TEST_CASE("pregenerated negatives are counted per item") {
  std::mt19937_64 rng(1);
  const PrefixDataset d = RandomData(rng, 3, 2, 6, 5);
  const auto lm = MakeRandomNGram({5, 2, 2.0, false, false}, 3);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 16, 5, 9);
  CHECK(negs.ids.size() == 48 * 4);
  CHECK(negs.completion(2, 15).size() == 4);
  for (TokenId id : negs.ids) CHECK(id < 5);
}

TEST_CASE("negatives with k=1 repeat the greedy completion") {
  std::mt19937_64 rng(2);
  const PrefixDataset d = RandomData(rng, 4, 1, 5, 6);
  const auto lm = MakeRandomNGram({6, 2, 2.0, false, false}, 4);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 8, 1, 9);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto first = negs.completion(i, 0);
    for (std::size_t j = 1; j < 8; ++j) {
      const auto c = negs.completion(i, j);
      CHECK(std::equal(c.begin(), c.end(), first.begin()));
    }
  }
}

TEST_CASE("negatives with k=|V| follow the exact LM completion distribution") {
  const auto lm = MakeRandomNGram({6, 2, 2.0, true, false}, 12);
  PrefixDataset d = MakePrefixDataset(2, 5);
  const Tokens prefix{1, 3};
  Tokens x{1, 3, 0, 0, 0};
  d.items.push_back(x);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 10000, 6, 5);
  const Enumeration exact = EnumerateCompletions(*lm, prefix, 5, 216);
  std::vector<double> freq(216, 0.0);
  for (std::size_t j = 0; j < negs.m; ++j) {
    freq[CompletionCode(negs.completion(0, j), 6)] += 1.0 / 10000.0;
  }
  double tv = 0.0;
  for (std::size_t c = 0; c < 216; ++c) tv += 0.5 * std::abs(freq[c] - std::exp(exact.log_p_lm[c]));
  CHECK(tv < 0.05);
}

TEST_CASE("negative set file round-trips") {
  std::mt19937_64 rng(3);
  const PrefixDataset d = RandomData(rng, 5, 2, 6, 7);
  const auto lm = MakeRandomNGram({7, 2, 1.0, false, false}, 1);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 3, 4, 11);
  const auto dir = testing::ScratchDir("negatives");
  SaveNegatives(negs, dir / "negs.bin");
  const NegativeSet back = LoadNegatives(dir / "negs.bin");
  CHECK(back.ids == negs.ids);
  CHECK(back.m == 3);
  CHECK(back.k == 4);
  CHECK(back.seed == 11);
  CHECK(back.prefix_len == 2);
  CHECK(back.seq_len == 6);
  testing::WriteFile(dir / "bad.bin", "RESEBM\x01 garbage");
  CHECK_THROWS(LoadNegatives(dir / "bad.bin"));
}

TEST_CASE("gradient clipping yields an update of norm lr times the threshold") {
  std::vector<double> params(4, 0.0);
  std::vector<double> grad{6.0, 8.0, 0.0, 0.0};
  const double norm = SgdStep(params, grad, 0.3, 1.0);
  CHECK(norm == 10.0);
  CHECK(L2Norm(params) == Approx(0.3).epsilon(1e-15));
}

TEST_CASE("NCE separates positives that contain token 0 from negatives that never do") {
  std::mt19937_64 rng(4);
  const std::size_t V = 4;
  PrefixDataset d = MakePrefixDataset(1, 4);
  for (int i = 0; i < 400; ++i) {
    Tokens x(4);
    for (TokenId& t : x) t = static_cast<TokenId>(1 + rng() % 3);
    x[1 + rng() % 3] = 0;
    d.items.push_back(x);
  }
  const testing::FixedLM never_zero({1e-300, 1.0 / 3, 1.0 / 3, 1.0 / 3});
  const NegativeSet negs = PregenerateNegatives(never_zero, d, 4, 3, 5);
  for (TokenId id : negs.ids) REQUIRE(id != 0);
  PooledScorer energy({V, 4, 0, 8, Direction::kBidirectional}, 6);
  const auto curve = TrainEnergyNce(energy, d, negs, {0.5, 2000, 32, 1, 10.0, 7});
  CHECK(TailMean(curve, 100) < 0.1);
}

TEST_CASE("NCE on indistinguishable classes stays near 2 log 2") {
  const auto lm = MakeRandomNGram({5, 2, 1.0, false, false}, 8);
  const SequenceBatch seqs = SampleSequences(*lm, {}, 5, 2000, 5, 1);
  PrefixDataset d = MakePrefixDataset(1, 5);
  d.items = seqs;
  const NegativeSet negs = PregenerateNegatives(*lm, d, 4, 5, 2);
  PooledScorer energy({5, 4, 1, 8, Direction::kBidirectional}, 3);
  const auto curve = TrainEnergyNce(energy, d, negs, {0.1, 2000, 64, 1, 10.0, 4});
  CHECK(std::abs(TailMean(curve, 200) - 2.0 * std::log(2.0)) < 0.05);
}

TEST_CASE("NCE training is identical across thread counts") {
  std::mt19937_64 rng(5);
  const PrefixDataset d = RandomData(rng, 200, 2, 6, 6);
  const auto lm = MakeRandomNGram({6, 2, 1.0, false, false}, 3);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 4, 6, 2);
  std::vector<std::vector<double>> curves, params;
  for (int threads : {1, 3, 4}) {
    kernels::SetThreads(threads);
    PooledScorer energy({6, 3, 1, 5, Direction::kCausal}, 3);
    curves.push_back(TrainEnergyNce(energy, d, negs, {0.3, 50, 100, 2, 10.0, 4}));
    params.emplace_back(energy.params().begin(), energy.params().end());
  }
  kernels::SetThreads(1);
  CHECK(curves[0] == curves[1]);
  CHECK(curves[0] == curves[2]);
  CHECK(params[0] == params[2]);
}

TEST_CASE("non-finite NCE loss restores the last good parameters") {
  std::mt19937_64 rng(6);
  const PrefixDataset d = RandomData(rng, 50, 1, 4, 4);
  const auto lm = MakeRandomNGram({4, 2, 1.0, false, false}, 3);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 2, 4, 2);
  PooledScorer energy({4, 2, 1, 3, Direction::kCausal}, 3);
  // Saturated hidden units and huge projections overflow the energy.
  for (std::size_t h = 0; h < 3; ++h) {
    energy.hidden_b(h) = 50.0;
    energy.proj_w(h) = 1.5e308;
  }
  energy.proj_b() = 1.5e308;
  const std::vector<double> initial(energy.params().begin(), energy.params().end());
  std::size_t failed_step = 99;
  try {
    TrainEnergyNce(energy, d, negs, {0.1, 10, 16, 1, 10.0, 4});
  } catch (const NonFiniteLossError& e) {
    failed_step = e.step();
  }
  CHECK(failed_step == 0);
  CHECK(AllFinite(energy.params()));
  CHECK(std::vector<double>(energy.params().begin(), energy.params().end()) == initial);
}

TEST_CASE("NCE config is validated") {
  std::mt19937_64 rng(7);
  const PrefixDataset d = RandomData(rng, 10, 1, 4, 4);
  const auto lm = MakeRandomNGram({4, 2, 1.0, false, false}, 3);
  const NegativeSet negs = PregenerateNegatives(*lm, d, 2, 4, 2);
  PooledScorer energy({4, 2, 1, 3, Direction::kCausal}, 3);
  CHECK_THROWS(TrainEnergyNce(energy, d, negs, {0.1, 10, 4, 3, 10.0, 1}));
  CHECK_THROWS(TrainEnergyNce(energy, d, negs, {0.0, 10, 4, 1, 10.0, 1}));
}
