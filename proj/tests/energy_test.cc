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

#include "resebm/energy.h"
#include "resebm/numeric.h"

using namespace resebm;
using doctest::Approx;

namespace {

Tokens RandomSeq(std::mt19937_64& rng, std::size_t T, std::size_t V) {
  Tokens s(T);
  for (TokenId& t : s) t = static_cast<TokenId>(rng() % V);
  return s;
}

std::vector<double> CentralDifferences(EnergyModel& m, const Tokens& x,
                                       std::size_t p) {
  std::vector<double> g(m.num_params());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double saved = m.params()[i];
    m.params()[i] = saved + 1e-5;
    const double up = m.Energy(x, p);
    m.params()[i] = saved - 1e-5;
    const double down = m.Energy(x, p);
    m.params()[i] = saved;
    g[i] = (up - down) / 2e-5;
  }
  return g;
}

}  // namespace

TEST_CASE("fresh tabular energy is zero everywhere") {
  const TabularEnergy e(3, 1, 3, {{0}, {2}});
  CHECK(e.num_params() == 2 * 9);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 30; ++i) CHECK(e.Energy(RandomSeq(rng, 3, 3), 1) == 0.0);
}

TEST_CASE("tabular gradient is one-hot at the (prefix, completion) entry") {
  const TabularEnergy e(3, 1, 3, {{0}, {2}});
  const Tokens x{2, 1, 2};
  const std::vector<double> g = e.ParamGrad(x, 1);
  // Second prefix row, completion code 1*3 + 2 = 5.
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == (i == 9 + 5 ? 1.0 : 0.0));
  const Tokens unseen{1, 1, 2};
  for (double v : e.ParamGrad(unseen, 1)) CHECK(v == 0.0);
}

TEST_CASE("tabular energy enforces the enumeration cap") {
  CHECK_NOTHROW(TabularEnergy(4, 1, 9, {{0}}, 65536));
  CHECK_THROWS(TabularEnergy(4, 1, 10, {{0}}, 65536));
  CHECK_THROWS(TabularEnergy(6, 2, 5, {{1, 1}}, 215));
}

TEST_CASE("pooled scorer with zero projection weight returns its bias") {
  PooledScorer m({5, 3, 1, 4, Direction::kBidirectional}, 7);
  for (std::size_t h = 0; h < 4; ++h) m.proj_w(h) = 0.0;
  m.proj_b() = -1.25;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) CHECK(m.Energy(RandomSeq(rng, 6, 5), 2) == -1.25);
}

TEST_CASE("pooled scorer closed-form single position") {
  PooledScorer m({2, 1, 0, 1, Direction::kBidirectional}, 7);
  for (double& v : m.params()) v = 0.0;
  m.embed(1, 0) = 2.0;
  m.hidden_w(0, 0) = 1.0;
  m.proj_w(0) = 1.0;
  const Tokens x{0, 1};
  CHECK(m.Energy(x, 1) == Approx(0.9640275800758169).epsilon(1e-12));
}

TEST_CASE("zero projection weight blocks gradient to earlier layers") {
  PooledScorer m({5, 3, 1, 4, Direction::kCausal}, 7);
  for (std::size_t h = 0; h < 4; ++h) m.proj_w(h) = 0.0;
  const Tokens x{1, 2, 3, 4, 0};
  const std::vector<double> g = m.ParamGrad(x, 1);
  for (const auto& b : m.blocks()) {
    for (std::size_t i = 0; i < b.size; ++i) {
      const double v = g[b.offset + i];
      if (std::string(b.name) == "proj_b") {
        CHECK(v == 1.0);
      } else if (std::string(b.name) != "proj_w") {
        CHECK(v == 0.0);
      }
    }
  }
}

TEST_CASE("causal features ignore later tokens, bidirectional use the window") {
  PooledScorer causal({6, 3, 2, 4, Direction::kCausal}, 3, 1.0);
  PooledScorer bidir({6, 3, 1, 4, Direction::kBidirectional}, 3, 1.0);
  const Tokens x{1, 2, 3, 4, 5, 1, 2};
  for (std::size_t t = 0; t + 1 < x.size(); ++t) {
    Tokens y = x;
    for (std::size_t j = t + 1; j < y.size(); ++j) y[j] = (y[j] + 1) % 6;
    CHECK(causal.PositionFeature(x, t) == causal.PositionFeature(y, t));
    Tokens z = x;
    z[t + 1] = (z[t + 1] + 1) % 6;
    CHECK(bidir.PositionFeature(x, t) != bidir.PositionFeature(z, t));
    if (t + 2 < x.size()) {
      Tokens far = x;
      far[t + 2] = (far[t + 2] + 1) % 6;
      CHECK(bidir.PositionFeature(x, t) == bidir.PositionFeature(far, t));
    }
  }
}

TEST_CASE("energy gradients match central differences") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 50; ++i) {
    const std::size_t V = 2 + rng() % 6;
    const std::size_t T = 2 + rng() % 6;
    const std::size_t p = rng() % T;
    const Direction dir = i % 2 ? Direction::kCausal : Direction::kBidirectional;
    PooledScorer m({V, 1 + rng() % 4, rng() % 3, 1 + rng() % 6, dir}, rng(), 0.7);
    const Tokens x = RandomSeq(rng, T, V);
    const std::vector<double> g = m.ParamGrad(x, p);
    CHECK(g.size() == m.num_params());
    CHECK(std::isfinite(m.Energy(x, p)));
    CHECK(RelativeError(g, CentralDifferences(m, x, p)) < 1e-4);
  }
  for (int i = 0; i < 50; ++i) {
    const std::size_t V = 2 + rng() % 3;
    TabularEnergy m(V, 1, 3, {{0}, {1}});
    for (double& v : m.params()) v = std::normal_distribution<double>()(rng);
    Tokens x = RandomSeq(rng, 3, V);
    x[0] = static_cast<TokenId>(rng() % 2);
    CHECK(RelativeError(m.ParamGrad(x, 1), CentralDifferences(m, x, 1)) < 1e-4);
  }
}

TEST_CASE("direction names round-trip") {
  CHECK(ParseDirection(DirectionName(Direction::kCausal)) == Direction::kCausal);
  CHECK(ParseDirection("bidirectional") == Direction::kBidirectional);
  CHECK_THROWS(ParseDirection("sideways"));
}

TEST_CASE("energy rejects malformed input") {
  PooledScorer m({4, 2, 1, 3, Direction::kCausal}, 1);
  const Tokens bad{0, 7, 1};
  CHECK_THROWS(m.Energy(bad, 1));
  const Tokens ok{0, 1, 2};
  CHECK_THROWS(m.Energy(ok, 3));
}
