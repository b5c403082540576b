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
#include "resebm/language_model.h"
#include "resebm/neural_lm.h"
#include "resebm/ngram_lm.h"
#include "resebm/numeric.h"
#include "resebm/ralm.h"
#include "resebm/toy_task.h"
#include "test_util.h"

using namespace resebm;
using doctest::Approx;

namespace {

SequenceBatch Rows(std::size_t length, const std::vector<Tokens>& rows) {
  SequenceBatch b(length);
  for (const Tokens& r : rows) b.push_back(r);
  return b;
}

void ZeroBlock(NeuralLM& lm, const std::string& name) {
  for (const auto& b : lm.blocks()) {
    if (name == b.name) {
      for (std::size_t i = 0; i < b.size; ++i) lm.params()[b.offset + i] = 0.0;
    }
  }
}

// Residual whose next-token distribution is `probs` for every history.
std::shared_ptr<NeuralLM> ConstantNeural(const std::vector<double>& probs) {
  auto lm = std::make_shared<NeuralLM>(NeuralLmShape{probs.size(), 2, 1, 3}, 5);
  ZeroBlock(*lm, "out_w");
  for (const auto& b : lm->blocks()) {
    if (std::string(b.name) == "out_b") {
      for (std::size_t v = 0; v < probs.size(); ++v) {
        lm->params()[b.offset + v] = std::log(probs[v]);
      }
    }
  }
  return lm;
}

}  // namespace

TEST_CASE("ngram_fit applies additive smoothing") {
  const NGramLM lm = FitNGram(Rows(2, {{1, 2}, {1, 2}}), 3, 2, 1.0);
  const Tokens a{1};
  CHECK(std::exp(lm.NextLogProbs(a)[2]) == Approx(0.6).epsilon(1e-12));
  CHECK(lm.NextLogProbs(a)[2] == Approx(-0.5108256237659907).epsilon(1e-12));
  const Tokens b{2};
  for (double lp : lm.NextLogProbs(b)) CHECK(std::exp(lp) == Approx(1.0 / 3.0));
}

TEST_CASE("ngram smoothing limit approaches uniform") {
  const NGramLM lm = FitNGram(Rows(2, {{1, 2}, {1, 2}}), 3, 2, 1e6);
  const Tokens a{1};
  for (double lp : lm.NextLogProbs(a)) {
    CHECK(std::abs(std::exp(lp) - 1.0 / 3.0) < 1e-5);
  }
}

TEST_CASE("ngram probabilities are positive and normalized") {
  std::mt19937_64 rng(9);
  const auto lm = MakeRandomNGram({7, 3, 2.0, false, false}, 4);
  for (int i = 0; i < 50; ++i) {
    Tokens h(rng() % 5);
    for (TokenId& t : h) t = static_cast<TokenId>(rng() % 7);
    const auto lp = lm->NextLogProbs(h);
    CHECK(std::abs(LogSumExp(lp)) < 1e-9);
    for (double v : lp) CHECK(std::isfinite(v));
  }
}

TEST_CASE("neural LM with zero output layer is uniform") {
  NeuralLM lm({5, 3, 2, 4}, 11);
  ZeroBlock(lm, "out_w");
  ZeroBlock(lm, "out_b");
  const Tokens h{1, 2, 3};
  for (double lp : lm.NextLogProbs(h)) CHECK(lp == Approx(std::log(0.2)).epsilon(1e-12));
}

TEST_CASE("neural LM output is normalized for random parameters") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NeuralLM lm({9, 4, 3, 5}, seed, 2.0);
    const Tokens h{1, 8, 2, 2};
    CHECK(std::abs(LogSumExp(lm.NextLogProbs(h))) < 1e-9);
  }
}

TEST_CASE("sequence_log_prob sums per-step log-probabilities") {
  const testing::FixedLM u = testing::UniformLM(4);
  const Tokens x{0, 1, 2, 3};
  CHECK(SequenceLogProb(u, x, 2) == Approx(2.0 * std::log(0.25)).epsilon(1e-12));
  CHECK(SequenceLogProb(u, x, 4) == 0.0);

  const auto lm = MakeRandomNGram({6, 2, 3.0, true, false}, 2);
  const Tokens y{1, 4, 2, 5, 3};
  double oracle = 0.0;
  for (std::size_t t = 2; t < y.size(); ++t) {
    oracle += lm->NextLogProbs(std::span<const TokenId>(y).first(t))[y[t]];
  }
  CHECK(SequenceLogProb(*lm, y, 2) == Approx(oracle).epsilon(1e-12));
}

TEST_CASE("top-k sampling with k=1 follows the argmax") {
  const auto lm = MakeRandomNGram({6, 2, 3.0, false, false}, 8);
  const Tokens prefix{3};
  const Tokens x = SampleCompletionTopK(*lm, prefix, 6, 1, 123);
  for (std::size_t t = 1; t < x.size(); ++t) {
    const auto lp = lm->NextLogProbs(std::span<const TokenId>(x).first(t));
    CHECK(x[t] == std::max_element(lp.begin(), lp.end()) - lp.begin());
  }
}

TEST_CASE("top-k sampling is deterministic per seed") {
  const auto lm = MakeRandomNGram({6, 2, 1.0, false, false}, 8);
  const Tokens prefix{3, 1};
  CHECK(SampleCompletionTopK(*lm, prefix, 9, 4, 77) ==
        SampleCompletionTopK(*lm, prefix, 9, 4, 77));
}

TEST_CASE("top-k sampling with k=|V| matches the first-token marginal") {
  const auto lm = MakeRandomNGram({6, 2, 1.0, false, false}, 21);
  const Tokens prefix{2};
  std::vector<double> counts(6, 0.0);
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    counts[SampleCompletionTopK(*lm, prefix, 2, 6, StreamSeed(5, i))[1]] += 1.0;
  }
  const auto lp = lm->NextLogProbs(prefix);
  double chi2 = 0.0;
  for (std::size_t v = 0; v < 6; ++v) {
    const double expected = kDraws * std::exp(lp[v]);
    chi2 += (counts[v] - expected) * (counts[v] - expected) / expected;
  }
  // Upper 1% point of the chi-squared distribution with 5 degrees of freedom.
  CHECK(chi2 < 15.086);
}

TEST_CASE("neural LM initial loss with zero output layer is log|V|") {
  NeuralLM lm({5, 3, 2, 4}, 11);
  ZeroBlock(lm, "out_w");
  ZeroBlock(lm, "out_b");
  const SequenceBatch data = Rows(4, {{1, 2, 3, 4}, {4, 3, 2, 1}});
  const auto curve = TrainNeuralLm(lm, data, {0.1, 3, 4, 10.0, 1});
  CHECK(std::abs(curve.front() - std::log(5.0)) < 1e-9);
}

TEST_CASE("neural LM training approaches the generator entropy") {
  const std::size_t V = 4;
  const std::size_t T = 6;
  const auto gen = MakeRandomNGram({V, 2, 1.5, false, false}, 31);
  const SequenceBatch train = SampleSequences(*gen, {}, T, 4000, V, 1);
  const SequenceBatch held = SampleSequences(*gen, {}, T, 2000, V, 2);
  // Exact per-token entropy by enumerating every sequence.
  const Enumeration all = EnumerateCompletions(*gen, {}, T, 1 << 12);
  double entropy = 0.0;
  for (double lp : all.log_p_lm) entropy -= std::exp(lp) * lp;
  entropy /= static_cast<double>(T);
  NeuralLM lm({V, 8, 2, 16}, 3);
  TrainNeuralLm(lm, train, {0.5, 3000, 32, 10.0, 4});
  const double ce = MeanCrossEntropy(lm, held);
  CHECK(std::abs(ce - entropy) < 0.1);
}

TEST_CASE("neural LM gradients match central differences") {
  std::mt19937_64 rng(13);
  const auto base = MakeRandomNGram({5, 2, 2.0, false, false}, 6);
  for (int i = 0; i < 50; ++i) {
    NeuralLM lm({5, 1 + rng() % 3, 1 + rng() % 3, 1 + rng() % 5}, rng(), 0.5);
    Tokens seq(2 + rng() % 5);
    for (TokenId& t : seq) t = static_cast<TokenId>(rng() % 5);
    const std::size_t pos = rng() % seq.size();
    const LanguageModel* b = i % 2 ? base.get() : nullptr;
    std::vector<double> analytic(lm.num_params(), 0.0);
    lm.LossAndGrad(seq, pos, b, 1.0, analytic);
    std::vector<double> numeric(lm.num_params());
    std::vector<double> scratch(lm.num_params());
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      const double saved = lm.params()[k];
      lm.params()[k] = saved + 1e-5;
      const double up = lm.LossAndGrad(seq, pos, b, 1.0, scratch);
      lm.params()[k] = saved - 1e-5;
      const double down = lm.LossAndGrad(seq, pos, b, 1.0, scratch);
      lm.params()[k] = saved;
      numeric[k] = (up - down) / 2e-5;
    }
    CHECK(RelativeError(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("RALM combines base and residual by renormalized product") {
  auto base = std::make_shared<testing::FixedLM>(std::vector<double>{0.5, 0.25, 0.25});
  const Ralm m(base, ConstantNeural({0.25, 0.5, 0.25}));
  const Tokens h{1};
  const auto lp = m.NextLogProbs(h);
  CHECK(std::exp(lp[0]) == Approx(0.4).epsilon(1e-12));
  CHECK(std::exp(lp[1]) == Approx(0.4).epsilon(1e-12));
  CHECK(std::exp(lp[2]) == Approx(0.2).epsilon(1e-12));
}

TEST_CASE("RALM with a uniform factor reduces to the other factor") {
  const auto ngram = MakeRandomNGram({5, 2, 2.0, false, false}, 3);
  const Ralm with_uniform_residual(ngram, ConstantNeural(std::vector<double>(5, 0.2)));
  auto residual = std::make_shared<NeuralLM>(NeuralLmShape{5, 3, 2, 4}, 9, 1.0);
  const Ralm with_uniform_base(std::make_shared<testing::FixedLM>(testing::UniformLM(5)),
                               residual);
  const Tokens h{4, 2};
  const auto a = with_uniform_residual.NextLogProbs(h);
  const auto b = ngram->NextLogProbs(h);
  const auto c = with_uniform_base.NextLogProbs(h);
  const auto d = residual->NextLogProbs(h);
  for (std::size_t v = 0; v < 5; ++v) {
    CHECK(a[v] == Approx(b[v]).epsilon(1e-12));
    CHECK(c[v] == Approx(d[v]).epsilon(1e-12));
  }
  CHECK(std::abs(LogSumExp(c)) < 1e-9);
}

TEST_CASE("RALM training leaves the base untouched and lowers the loss") {
  const auto gen = MakeRandomNGram({5, 2, 2.0, false, false}, 41);
  const SequenceBatch data = SampleSequences(*gen, {}, 6, 500, 5, 3);
  auto base = std::make_shared<NGramLM>(FitNGram(data, 5, 1, 1.0));
  const Tokens h{2};
  const auto before = base->NextLogProbs(h);
  Ralm m(base, std::make_shared<NeuralLM>(NeuralLmShape{5, 4, 1, 8}, 2));
  const auto curve = TrainRalm(m, data, {0.3, 600, 32, 10.0, 5});
  CHECK(base->NextLogProbs(h) == before);
  CHECK(MeanCrossEntropy(m, data) < MeanCrossEntropy(*base, data));
  CHECK(curve.size() == 600);
}
