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

#include "resebm/analysis.h"
#include "resebm/energy.h"
#include "resebm/sampling.h"
#include "resebm/toy_task.h"
#include "test_util.h"

using namespace resebm;
using doctest::Approx;

namespace {

SequenceBatch Batch(const std::vector<Tokens>& rows) {
  SequenceBatch b(rows.front().size());
  for (const Tokens& r : rows) b.push_back(r);
  return b;
}

}  // namespace

TEST_CASE("unique_ngram_pct hand counts") {
  CHECK(UniqueNgramPct(std::vector<Tokens>{{0, 0, 0, 0}}, 1) == 25.0);
  CHECK(UniqueNgramPct(std::vector<Tokens>{{0, 1, 2, 3}}, 1) == 100.0);
  CHECK(UniqueNgramPct(std::vector<Tokens>{{0, 1, 0, 1}}, 2) == 200.0 / 3.0);
  // Grams are pooled across samples: {ab, ba, bb} over 6 slots.
  CHECK(UniqueNgramPct(std::vector<Tokens>{{0, 1, 0, 1}, {1, 1, 0, 1}}, 2) == 50.0);
}

TEST_CASE("unique_ngram_pct range and order invariance") {
  std::mt19937_64 rng(3);
  std::vector<Tokens> rows;
  for (int i = 0; i < 40; ++i) {
    Tokens r(6);
    for (TokenId& v : r) v = static_cast<TokenId>(rng() % 4);
    rows.push_back(r);
  }
  for (std::size_t n = 1; n <= 6; ++n) {
    const double a = UniqueNgramPct(rows, n);
    CHECK(a > 0.0);
    CHECK(a <= 100.0);
    std::vector<Tokens> reversed(rows.rbegin(), rows.rend());
    CHECK(UniqueNgramPct(reversed, n) == a);
    CHECK(UniqueNgramPct(Batch(rows), n) == a);
  }
  CHECK_THROWS(UniqueNgramPct(rows, 7));
  CHECK_THROWS(UniqueNgramPct(rows, 0));
  CHECK_THROWS(UniqueNgramPct(std::vector<Tokens>{}, 1));
}

TEST_CASE("density report on identical sets has zero gap") {
  const testing::FixedLM lm({0.5, 0.25, 0.125, 0.125});
  const std::vector<Tokens> rows{{0, 1, 2, 3}, {1, 1, 0, 0}, {3, 2, 3, 1}};
  const DensityReport r =
      ScoreDensityReport(LmScorer(lm, 1), {{"real", Batch(rows)}, {"copy", Batch(rows)}}, 5);
  REQUIRE(r.sets.size() == 2);
  CHECK(r.sets[1].mean_gap == 0.0);
  CHECK(r.edges.size() == 6);
  const double first = std::log(0.25) + std::log(0.125) + std::log(0.125);
  CHECK(r.sets[0].scores[0] == Approx(first).epsilon(1e-12));
}

TEST_CASE("density histogram counts sum to the set size") {
  const testing::FixedLM lm({0.4, 0.3, 0.2, 0.1});
  std::mt19937_64 rng(9);
  std::vector<Tokens> a, b;
  for (int i = 0; i < 37; ++i) {
    Tokens r(5);
    for (TokenId& v : r) v = static_cast<TokenId>(rng() % 4);
    (i % 3 == 0 ? b : a).push_back(r);
  }
  const DensityReport r = ScoreDensityReport(LmScorer(lm, 2), {{"a", Batch(a)}, {"b", Batch(b)}}, 7);
  for (const DensitySummary& s : r.sets) {
    std::size_t total = 0;
    for (std::size_t c : s.counts) total += c;
    CHECK(total == s.scores.size());
  }
  CHECK(r.sets[0].scores.size() == a.size());
  const std::string csv = r.ToCsv();
  CHECK(csv.rfind("set,bin_lo,bin_hi,count,mean,mean_gap\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 7);
  CHECK_THROWS(ScoreDensityReport(LmScorer(lm, 2), {}, 7));
  CHECK_THROWS(ScoreDensityReport(LmScorer(lm, 2), {{"a", Batch(a)}}, 0));
}

TEST_CASE("joint samples match real data scores more closely than base samples") {
  const ToyTask task = BuildToyTask(ToyConfig{});
  const TabularEnergy energy = testing::OptimalToyEnergy(task);
  const std::size_t p = 2, T = 5, count = 2000;
  SequenceBatch real(T), joint(T), base(T);
  for (std::size_t i = 0; i < count; ++i) {
    const auto x = task.positives.items.row((i * 7919) % task.positives.size());
    real.push_back(x);
    const ProposalSet ps = TopKJointSample(*task.base_lm, energy, x.first(p), T, 256, 6,
                                           StreamSeed(21, i));
    joint.push_back(ps.proposals.row(ps.chosen));
    base.push_back(SampleCompletionTopK(*task.base_lm, x.first(p), T, 6, StreamSeed(22, i)));
  }
  const DensityReport joint_report = ScoreDensityReport(
      JointPointScorer(*task.base_lm, energy, p, T, 10000, 5),
      {{"real", real}, {"joint", joint}}, 20);
  const DensityReport base_report =
      ScoreDensityReport(LmScorer(*task.base_lm, p), {{"real", real}, {"base", base}}, 20);
  const double joint_gap = joint_report.sets[1].mean_gap;
  const double base_gap = base_report.sets[1].mean_gap;
  MESSAGE("mean gap joint " << joint_gap << " base " << base_gap);
  CHECK(joint_gap <= base_gap);
}

TEST_CASE("estimator_sweep rows") {
  const testing::FixedLM lm({0.4, 0.3, 0.2, 0.1});
  PrefixDataset d = MakePrefixDataset(1, 4);
  d.items.push_back(Tokens{0, 1, 2, 3});
  d.items.push_back(Tokens{2, 0, 0, 1});
  const std::vector<std::size_t> ns{2, 8, 32};
  const auto rows = EstimatorSweep(lm, ConstantEnergy(1.25), d, ns, 5, 1);
  REQUIRE(rows.size() == 3);
  const double ppl = ExactLmPpl(lm, d);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(rows[i].n == ns[i]);
    CHECK(rows[i].mean_upper - rows[i].mean_lower == Approx(0.0).epsilon(1e-12).scale(ppl));
    CHECK(rows[i].mean_lower == Approx(ppl).epsilon(1e-12));
    CHECK(rows[i].stderr_width == Approx(0.0).scale(1e-9));
  }
  const std::string csv = SweepCsv(rows);
  CHECK(csv.rfind("n,mean_lower,mean_upper,stderr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK_THROWS(EstimatorSweep(lm, ConstantEnergy(0.0), d, {8, 2}, 5, 1));
  CHECK_THROWS(EstimatorSweep(lm, ConstantEnergy(0.0), d, {1}, 5, 1));
}

TEST_CASE("estimator_sweep width shrinks on the toy task") {
  const ToyTask task = BuildToyTask(ToyConfig{});
  const TabularEnergy energy = testing::OptimalToyEnergy(task);
  PrefixDataset d = MakePrefixDataset(2, 5);
  for (std::size_t i = 0; i < task.positives.size(); i += 200) {
    d.items.push_back(task.positives.items.row(i));
  }
  const auto rows = EstimatorSweep(*task.base_lm, energy, d, {8, 64, 512}, 20, 3);
  const auto a = EstimatorSweep(*task.base_lm, energy, d, {8, 64, 512}, 20, 3);
  REQUIRE(rows.size() == 3);
  const auto width = [&](std::size_t i) { return rows[i].mean_upper - rows[i].mean_lower; };
  MESSAGE("widths " << width(0) << " " << width(1) << " " << width(2));
  CHECK(width(2) < width(0));
  for (std::size_t i = 1; i < 3; ++i) {
    CHECK(width(i) <= width(i - 1) + 2.0 * (rows[i].stderr_width + rows[i - 1].stderr_width));
  }
  CHECK(SweepCsv(rows) == SweepCsv(a));
}
