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

#include <algorithm>
#include <numeric>
#include <random>

#include "resebm/energy.h"
#include "resebm/estimation.h"
#include "resebm/kernels.h"
#include "resebm/sampling.h"
#include "resebm/toy_task.h"
#include "test_util.h"

using namespace resebm;
using doctest::Approx;

namespace {

// Enumerable toy (|V| = 6, p = 2, T = 5) with a random tabular energy.
struct Toy {
  std::shared_ptr<NGramLM> lm = MakeRandomNGram({6, 2, 2.0, true, false}, 5);
  Tokens prefix{2, 3};
  TabularEnergy energy{6, 2, 5, {prefix}, 216};
  Toy() {
    std::mt19937_64 gen(6);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& w : energy.params()) w = normal(gen);
  }
};

}  // namespace

TEST_CASE("resample_weights closed forms") {
  const std::vector<double> flat{0.0, 0.0, 0.0};
  for (double w : ResampleWeights(flat)) CHECK(w == Approx(1.0 / 3.0).epsilon(1e-12));
  const std::vector<double> half{0.0, std::log(2.0)};
  const auto w2 = ResampleWeights(half);
  CHECK(w2[0] == Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(w2[1] == Approx(1.0 / 3.0).epsilon(1e-12));
  const std::vector<double> big{1000.0, 1001.0};
  const auto w3 = ResampleWeights(big);
  const double e = std::exp(1.0);
  CHECK(w3[0] == Approx(e / (1.0 + e)).epsilon(1e-12));
  CHECK(w3[1] == Approx(1.0 / (1.0 + e)).epsilon(1e-12));
  CHECK(w3[0] == Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("resample_weights is shift invariant and normalized") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 4.0);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> e(1 + rng() % 30), shifted;
    for (double& v : e) v = normal(rng);
    for (double v : e) shifted.push_back(v + 123.25);
    const auto a = ResampleWeights(e);
    const auto b = ResampleWeights(shifted);
    double total = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
      CHECK(std::abs(a[j] - b[j]) < 1e-12);
      total += a[j];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("resample_weights rejects bad input") {
  CHECK_THROWS(ResampleWeights(std::vector<double>{}));
  CHECK_THROWS(ResampleWeights(std::vector<double>{0.0, std::nan("")}));
  CHECK_THROWS(ResampleWeights(std::vector<double>{0.0, INFINITY}));
}

TEST_CASE("single proposal is always returned") {
  Toy toy;
  toy.energy.params()[0] = 1e6;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ProposalSet ps = TopKJointSample(*toy.lm, toy.energy, toy.prefix, 5, 1, 6, seed);
    CHECK(ps.chosen == 0);
    CHECK(ps.proposals.size() == 1);
    CHECK(ps.weights[0] == 1.0);
  }
}

TEST_CASE("returned sequence comes from the proposal set") {
  Toy toy;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ProposalSet ps = TopKJointSample(*toy.lm, toy.energy, toy.prefix, 5, 16, 3, seed);
    REQUIRE(ps.chosen < ps.proposals.size());
    CHECK(ps.proposals.size() == 16);
    CHECK(ps.k == 3);
    for (std::size_t i = 0; i < ps.proposals.size(); ++i) {
      const auto row = ps.proposals.row(i);
      CHECK(row.size() == 5);
      CHECK(row[0] == 2);
      CHECK(row[1] == 3);
      CHECK(std::isfinite(ps.energies[i]));
    }
    const double ess = ps.EffectiveSampleSize();
    CHECK(ess >= 1.0 - 1e-12);
    CHECK(ess <= 16.0 + 1e-9);
  }
}

TEST_CASE("joint sampling is deterministic per seed and pool independent") {
  Toy toy;
  kernels::SamplerPool pool(*toy.lm, 6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ProposalSet a = TopKJointSample(*toy.lm, toy.energy, toy.prefix, 5, 32, 6, seed);
    const ProposalSet b = TopKJointSample(pool, toy.energy, toy.prefix, 5, 32, seed);
    CHECK(a.chosen == b.chosen);
    CHECK(std::ranges::equal(a.proposals.flat(), b.proposals.flat()));
    CHECK(a.weights == b.weights);
  }
}

TEST_CASE("constant energy offset leaves the draw unchanged") {
  Toy toy;
  TabularEnergy shifted = toy.energy;
  for (double& w : shifted.params()) w += 7.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ProposalSet a = TopKJointSample(*toy.lm, toy.energy, toy.prefix, 5, 24, 6, seed);
    const ProposalSet b = TopKJointSample(*toy.lm, shifted, toy.prefix, 5, 24, 6, seed);
    CHECK(a.chosen == b.chosen);
  }
}

TEST_CASE("joint samples match the exact joint distribution") {
  Toy toy;
  kernels::SamplerPool pool(*toy.lm, 6);
  const std::vector<double> exact = ExactJointDistribution(*toy.lm, toy.energy, toy.prefix, 5);
  std::vector<double> freq(216, 0.0);
  const std::size_t draws = 10000;
  for (std::size_t i = 0; i < draws; ++i) {
    const ProposalSet ps = TopKJointSample(pool, toy.energy, toy.prefix, 5, 10000, StreamSeed(3, i));
    freq[CompletionCode(ps.proposals.row(ps.chosen).subspan(2), 6)] += 1.0 / draws;
  }
  double tv = 0.0;
  for (std::size_t c = 0; c < 216; ++c) tv += 0.5 * std::abs(freq[c] - exact[c]);
  MESSAGE("total variation " << tv);
  CHECK(tv < 0.05);
}

TEST_CASE("zero energy reproduces top-k LM sampling frequencies") {
  Toy toy;
  const ConstantEnergy zero(0.0);
  // Exact top-2 sampling distribution over completions by enumeration.
  std::vector<double> exact(216, 0.0);
  for (std::size_t c = 0; c < 216; ++c) {
    Tokens x = toy.prefix;
    for (TokenId v : DecodeCompletion(c, 3, 6)) x.push_back(v);
    double prob = 1.0;
    for (std::size_t t = 2; t < 5; ++t) {
      const auto lp = toy.lm->NextLogProbs(std::span(x).first(t));
      std::vector<std::size_t> order(6);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return lp[a] > lp[b]; });
      const double mass = std::exp(lp[order[0]]) + std::exp(lp[order[1]]);
      const bool kept = x[t] == order[0] || x[t] == order[1];
      prob *= kept ? std::exp(lp[x[t]]) / mass : 0.0;
    }
    exact[c] = prob;
  }
  std::vector<double> freq(216, 0.0);
  const std::size_t draws = 20000;
  for (std::size_t i = 0; i < draws; ++i) {
    const ProposalSet ps = TopKJointSample(*toy.lm, zero, toy.prefix, 5, 4, 2, StreamSeed(4, i));
    freq[CompletionCode(ps.proposals.row(ps.chosen).subspan(2), 6)] += 1.0 / draws;
  }
  double tv = 0.0;
  for (std::size_t c = 0; c < 216; ++c) tv += 0.5 * std::abs(freq[c] - exact[c]);
  CHECK(tv < 0.02);
}

TEST_CASE("approx_step_conditional without energy renormalizes the LM") {
  Toy toy;
  const Tokens h{2, 3, 1};
  const StepCandidates sc =
      ApproxStepConditional(*toy.lm, ConstantEnergy(0.0), h, 2, 5, 3, 20, 1);
  const auto lp = toy.lm->NextLogProbs(h);
  double mass = 0.0;
  for (TokenId v : sc.tokens) mass += std::exp(lp[v]);
  double total = 0.0;
  REQUIRE(sc.tokens.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sc.probs[i] == Approx(std::exp(lp[sc.tokens[i]]) / mass).epsilon(1e-12));
    if (i > 0) CHECK(lp[sc.tokens[i]] <= lp[sc.tokens[i - 1]]);
    total += sc.probs[i];
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("approx_step_conditional at the last step matches the exact conditional") {
  Toy toy;
  const Tokens h{2, 3, 0, 4};
  const StepCandidates sc = ApproxStepConditional(*toy.lm, toy.energy, h, 2, 5, 6, 1, 1);
  double total = 0.0;
  for (std::size_t i = 0; i < sc.tokens.size(); ++i) {
    const double exact = std::exp(ExactStepLogProb(*toy.lm, toy.energy, h, sc.tokens[i], 2, 5));
    CHECK(std::abs(sc.probs[i] - exact) < 1e-6);
    total += sc.probs[i];
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("approx_step_conditional sums to one mid sequence") {
  Toy toy;
  const Tokens h{2, 3};
  const StepCandidates sc = ApproxStepConditional(*toy.lm, toy.energy, h, 2, 5, 4, 200, 8);
  double total = 0.0;
  for (double q : sc.probs) total += q;
  CHECK(std::abs(total - 1.0) < 1e-9);
  CHECK_THROWS(ApproxStepConditional(*toy.lm, toy.energy, h, 2, 5, 7, 10, 8));
}

TEST_CASE("trained energy lowers immediate repeat probabilities") {
  RepetitionConfig cfg;
  const RepetitionTask task = BuildRepetitionTask(cfg);
  const std::unique_ptr<PooledScorer> energy = TrainRepetitionScorer(task);
  const std::size_t p = cfg.prefix_len;
  int probed = 0, lowered = 0;
  for (std::size_t i = 0; probed < 50 && i < task.train.size(); ++i) {
    const auto x = task.train.items.row(i);
    const std::size_t t = p + 1 + i % (cfg.seq_len - p - 2);
    const Tokens h(x.begin(), x.begin() + t);
    const StepCandidates sc =
        ApproxStepConditional(*task.base_lm, *energy, h, p, cfg.seq_len, 16, 200, i);
    const auto lp = task.base_lm->NextLogProbs(h);
    double mass = 0.0;
    for (TokenId v : sc.tokens) mass += std::exp(lp[v]);
    for (std::size_t j = 0; j < sc.tokens.size(); ++j) {
      if (sc.tokens[j] != h.back()) continue;
      ++probed;
      lowered += sc.probs[j] <= std::exp(lp[h.back()]) / mass;
    }
  }
  MESSAGE("repeat probability lowered in " << lowered << " of " << probed << " contexts");
  REQUIRE(probed >= 20);
  CHECK(lowered >= 0.8 * probed);
}
