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

#include "resebm/validation.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "resebm/analysis.h"
#include "resebm/cli.h"
#include "resebm/estimation.h"
#include "resebm/kernels.h"
#include "resebm/neural_lm.h"
#include "resebm/numeric.h"
#include "resebm/ralm.h"
#include "resebm/sampling.h"
#include "resebm/training.h"

namespace resebm {

namespace {

enum : std::uint64_t {
  kTagSandwich = 101,
  kTagCoverage,
  kTagSampler,
  kTagGradient,
  kTagPpl,
  kTagNormalization,
  kTagRepetitionJoint,
  kTagRepetitionBase,
  kTagCorpus,
};

constexpr double kGradientTolerance = 1e-4;
constexpr double kFiniteDifferenceStep = 1e-5;
constexpr double kNormalizationTolerance = 1e-9;
constexpr double kExactTolerance = 1e-9;

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Num(double v, int digits = 6) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

double TotalVariation(std::span<const double> a, std::span<const double> b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return 0.5 * tv;
}

double KlDivergence(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
  }
  return kl;
}

double MeanOf(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double StderrOf(const std::vector<double>& xs) {
  const double m = MeanOf(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  const double n = static_cast<double>(xs.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

double SumExp(std::span<const double> log_probs) {
  double s = 0.0;
  for (double v : log_probs) s += std::exp(v);
  return s;
}

Tokens RandomTokens(std::mt19937_64& rng, std::size_t len, std::size_t V) {
  std::uniform_int_distribution<TokenId> pick(0, static_cast<TokenId>(V - 1));
  Tokens t(len);
  for (TokenId& x : t) x = pick(rng);
  return t;
}

std::size_t Between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Central differences of `f` over `params`, restored afterwards.
template <typename F>
std::vector<double> NumericGrad(std::span<double> params, F&& f) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + kFiniteDifferenceStep;
    const double up = f();
    params[i] = saved - kFiniteDifferenceStep;
    const double down = f();
    params[i] = saved;
    g[i] = (up - down) / (2.0 * kFiniteDifferenceStep);
  }
  return g;
}

// Relative error with a floor on the scale, so exactly cancelling gradients
// compare by absolute difference.
double GradientError(std::span<const double> analytic,
                     std::span<const double> numeric) {
  constexpr double kScaleFloor = 1e-8;
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
  return L2Norm(diff) /
         std::max({L2Norm(analytic), L2Norm(numeric), kScaleFloor});
}

PooledScorer RandomScorer(std::mt19937_64& rng, std::size_t V, Direction dir,
                          double init_scale) {
  const PooledScorerShape shape{V, Between(rng, 1, 4), Between(rng, 0, 2),
                                Between(rng, 1, 6), dir};
  return PooledScorer(shape, rng(), init_scale);
}

NeuralLM RandomNeural(std::mt19937_64& rng, std::size_t V, double init_scale) {
  const NeuralLmShape shape{V, Between(rng, 1, 4), Between(rng, 1, 3),
                            Between(rng, 1, 6)};
  return NeuralLM(shape, rng(), init_scale);
}

std::shared_ptr<NGramLM> RandomNGram(std::mt19937_64& rng, std::size_t V) {
  return MakeRandomNGram({V, Between(rng, 1, 3), Uniform(rng, 0.5, 4.0),
                          false, false},
                         rng());
}

}  // namespace

ValidationSettings ValidationSettings::FromConfig(const Config& cfg) {
  ValidationSettings s;
  s.toy = ToyConfig::FromConfig(cfg);
  s.rep = RepetitionConfig::FromConfig(cfg);
  s.sandwich_trials = cfg.GetUint("sandwich_trials", s.sandwich_trials, 2);
  s.sandwich_n = cfg.GetUintList("sandwich_n", s.sandwich_n);
  s.bias_n = cfg.GetUintList("bias_n", s.bias_n);
  for (const auto* list : {&s.sandwich_n, &s.bias_n}) {
    for (std::size_t n : *list) {
      if (n < 2) {
        throw ConfigError(list == &s.sandwich_n ? "sandwich_n" : "bias_n",
                          "every sample count must be at least 2");
      }
    }
  }
  s.sampler_draws = cfg.GetUint("sampler_draws", s.sampler_draws, 1);
  s.sampler_proposals = cfg.GetUint("sampler_proposals", s.sampler_proposals, 1);
  s.normalization_cases =
      cfg.GetUint("normalization_cases", s.normalization_cases, 1);
  s.ppl_samples = cfg.GetUint("num_samples", s.ppl_samples, 2);
  return s;
}

Validator::Validator(ValidationSettings settings)
    : settings_(std::move(settings)) {}

Validator::~Validator() = default;

const ToyTask& Validator::toy() {
  if (!toy_) toy_ = std::make_unique<ToyTask>(BuildToyTask(settings_.toy));
  return *toy_;
}

const TabularEnergy& Validator::tabular() {
  if (!tabular_) tabular_ = TrainToyTabular(toy());
  return *tabular_;
}

const PooledScorer& Validator::pooled() {
  if (!pooled_) pooled_ = TrainToyPooled(toy());
  return *pooled_;
}

CheckResult Validator::OptimumRecovery() {
  const auto start = Clock::now();
  const ToyTask& task = toy();
  const TabularEnergy& energy = tabular();
  const std::size_t T = task.cfg.seq_len;
  const std::size_t cap = task.cfg.enum_cap;
  double max_tv = 0.0;
  bool kl_ok = true;
  std::ostringstream per;
  for (std::size_t i = 0; i < task.prefixes.size(); ++i) {
    const Tokens& prefix = task.prefixes[i];
    const std::vector<double> data = ToyDataDistribution(task, prefix);
    const std::vector<double> joint =
        ExactJointDistribution(*task.base_lm, energy, prefix, T, cap);
    const Enumeration base_enum = EnumerateCompletions(*task.base_lm, prefix, T, cap);
    std::vector<double> base(base_enum.log_p_lm.size());
    for (std::size_t j = 0; j < base.size(); ++j) base[j] = std::exp(base_enum.log_p_lm[j]);
    const double tv = TotalVariation(data, joint);
    const double kl_joint = KlDivergence(data, joint);
    const double kl_base = KlDivergence(data, base);
    max_tv = std::max(max_tv, tv);
    kl_ok = kl_ok && kl_joint < kl_base;
    per << " [prefix " << i << " tv=" << Num(tv, 4) << " kl_joint="
        << Num(kl_joint, 4) << " kl_base=" << Num(kl_base, 4) << ']';
  }
  CheckResult r{"optimum_recovery", false, "", Seconds(start)};
  r.passed = max_tv < 0.05 && kl_ok && r.seconds < 120.0;
  r.detail = "max_tv=" + Num(max_tv, 4) + " (< 0.05), kl_joint<kl_base=" +
             (kl_ok ? "yes" : "no") + per.str();
  return r;
}

double Validator::ExactLogZ() {
  const ToyTask& task = toy();
  return ExactLogPartition(*task.base_lm, pooled(), task.prefixes.front(),
                           task.cfg.seq_len, task.cfg.enum_cap);
}

const Validator::LogZTrialStats& Validator::LogZTrials(std::size_t n) {
  auto it = logz_trials_.find(n);
  if (it != logz_trials_.end()) return it->second;
  const ToyTask& task = toy();
  const PooledScorer& energy = pooled();
  const Tokens& prefix = task.prefixes.front();
  const std::uint64_t tag = StreamSeed(StreamSeed(task.cfg.seed, kTagSandwich), n);
  std::vector<double> lower(settings_.sandwich_trials);
  std::vector<double> upper(settings_.sandwich_trials);
  std::vector<double> cv(settings_.sandwich_trials);
  const double exact = ExactLogZ();
  for (std::size_t t = 0; t < settings_.sandwich_trials; ++t) {
    const LogZBounds z = EstimateLogPartition(*task.base_lm, energy, prefix,
                                              task.cfg.prefix_len, task.cfg.seq_len,
                                              n, StreamSeed(tag, t));
    lower[t] = z.lower;
    upper[t] = z.upper;
    const double d = z.lower - exact;
    cv[t] = d - std::expm1(d);
  }
  LogZTrialStats s{MeanOf(lower), StderrOf(lower), MeanOf(upper),
                   StderrOf(upper), MeanOf(cv),   StderrOf(cv)};
  return logz_trials_.emplace(n, s).first->second;
}

CheckResult Validator::LogZSandwich(const std::vector<std::size_t>& n_values) {
  const auto start = Clock::now();
  const double exact = ExactLogZ();
  bool ok = true;
  std::ostringstream d;
  d << "exact=" << Num(exact, 8) << " trials=" << settings_.sandwich_trials;
  for (std::size_t n : n_values) {
    const LogZTrialStats& s = LogZTrials(n);
    const double lo = s.mean_lower - 3.0 * s.se_lower;
    const double hi = s.mean_upper + 3.0 * s.se_upper;
    const bool checked = n >= 64;
    const bool inside = lo <= exact && exact <= hi;
    if (checked) ok = ok && inside;
    d << " [n=" << n << " lower=" << Num(s.mean_lower, 8) << "+-"
      << Num(s.se_lower, 3) << " upper=" << Num(s.mean_upper, 8) << "+-"
      << Num(s.se_upper, 3) << (checked ? (inside ? " ok" : " VIOLATED") : " unchecked")
      << ']';
  }
  CheckResult r{"logz_sandwich", ok, d.str(), Seconds(start)};
  r.passed = ok && r.seconds < 60.0;
  return r;
}

CheckResult Validator::BiasShrinkage(const std::vector<std::size_t>& n_values,
                                     BiasEstimate estimate) {
  const auto start = Clock::now();
  const double exact = ExactLogZ();
  const bool cv = estimate == BiasEstimate::kControlVariate;
  bool ok = true;
  double prev = 0.0;
  std::ostringstream d;
  d << (cv ? "bias |mean((T_n-exact)-(Z_n/Z-1))|" : "bias |mean(T_n)-exact|")
    << " over " << settings_.sandwich_trials << " trials:";
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    const LogZTrialStats& s = LogZTrials(n_values[i]);
    const double bias = std::abs(cv ? s.mean_cv : s.mean_lower - exact);
    const double se = cv ? s.se_cv : s.se_lower;
    if (i > 0 && !(bias < prev)) ok = false;
    d << " n=" << n_values[i] << ':' << Num(bias, 4) << "(se " << Num(se, 2) << ')';
    prev = bias;
  }
  d << (ok ? " strictly decreasing" : " NOT strictly decreasing");
  return {cv ? "bias_shrinkage_cv" : "bias_shrinkage", ok, d.str(), Seconds(start)};
}

CheckResult Validator::LastStepExact() {
  const auto start = Clock::now();
  const ToyTask& task = toy();
  const PooledScorer& energy = pooled();
  const std::size_t p = task.cfg.prefix_len;
  const std::size_t T = task.cfg.seq_len;
  const std::size_t V = task.cfg.vocab_size;
  double max_err = 0.0;
  std::size_t compared = 0;
  bool flags_ok = true;
  for (const Tokens& prefix : task.prefixes) {
    const Enumeration hists =
        EnumerateCompletions(*task.base_lm, prefix, T - 1, task.cfg.enum_cap);
    for (std::size_t h = 0; h < hists.sequences.size(); ++h) {
      const auto hist = hists.sequences.row(h);
      for (TokenId v = 0; v < V; ++v) {
        const StepProbBounds b =
            StepConditionalBounds(*task.base_lm, energy, hist, v, p, T, 2, 0);
        const double oracle =
            ExactStepLogProb(*task.base_lm, energy, hist, v, p, T, task.cfg.enum_cap);
        max_err = std::max({max_err, std::abs(b.lower - oracle),
                            std::abs(b.upper - oracle)});
        flags_ok = flags_ok && b.exact && b.t == T;
        ++compared;
      }
    }
  }
  const bool ok = flags_ok && max_err <= kExactTolerance;
  return {"last_step_exact", ok,
          "max |bound - oracle|=" + Num(max_err, 3) + " (<= 1e-9) over " +
              std::to_string(compared) + " (history, token) pairs",
          Seconds(start)};
}

CheckResult Validator::SecondToLastCoverage() {
  const auto start = Clock::now();
  const ToyTask& task = toy();
  const PooledScorer& energy = pooled();
  const std::size_t p = task.cfg.prefix_len;
  const std::size_t T = task.cfg.seq_len;
  if (T < p + 2) {
    return {"second_to_last_coverage", false, "needs seq_len >= prefix_len + 2",
            Seconds(start)};
  }
  // Greedy base-LM history of length T - 2, then its most probable token.
  Tokens hist = task.prefixes.front();
  auto argmax = [&](const Tokens& h) {
    const std::vector<double> lp = task.base_lm->NextLogProbs(h);
    return static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  };
  while (hist.size() < T - 2) hist.push_back(argmax(hist));
  const TokenId token = argmax(hist);
  const double oracle =
      ExactStepLogProb(*task.base_lm, energy, hist, token, p, T, task.cfg.enum_cap);
  const std::uint64_t tag = StreamSeed(task.cfg.seed, kTagCoverage);
  std::size_t covered = 0;
  double max_width = 0.0;
  double sum_width = 0.0;
  double sum_miss = 0.0;
  for (std::size_t t = 0; t < settings_.coverage_trials; ++t) {
    const StepProbBounds b = StepConditionalBounds(
        *task.base_lm, energy, hist, token, p, T, settings_.coverage_n,
        StreamSeed(tag, t));
    if (b.lower <= oracle && oracle <= b.upper) ++covered;
    max_width = std::max(max_width, b.upper - b.lower);
    sum_width += b.upper - b.lower;
    sum_miss += std::abs(0.5 * (b.lower + b.upper) - oracle);
  }
  const double coverage =
      static_cast<double>(covered) / static_cast<double>(settings_.coverage_trials);
  const bool ok = coverage >= 0.95 && max_width < 0.05;
  std::ostringstream d;
  d << "t=" << T - 1 << " n=" << settings_.coverage_n << " coverage="
    << covered << '/' << settings_.coverage_trials << " (>= 95%) mean_width="
    << Num(sum_width / static_cast<double>(settings_.coverage_trials), 4)
    << " max_width=" << Num(max_width, 4) << " (< 0.05) oracle=" << Num(oracle, 8)
    << " mean |midpoint - oracle|="
    << Num(sum_miss / static_cast<double>(settings_.coverage_trials), 4);
  return {"second_to_last_coverage", ok, d.str(), Seconds(start)};
}

CheckResult Validator::SamplerCorrectness() {
  const auto start = Clock::now();
  const ToyTask& task = toy();
  const TabularEnergy& energy = tabular();
  const std::size_t p = task.cfg.prefix_len;
  const std::size_t T = task.cfg.seq_len;
  const std::size_t V = task.cfg.vocab_size;
  const Tokens& prefix = task.prefixes.front();
  const std::vector<double> exact =
      ExactJointDistribution(*task.base_lm, energy, prefix, T, task.cfg.enum_cap);
  kernels::SamplerPool pool(*task.base_lm, V);
  std::vector<double> counts(exact.size(), 0.0);
  const std::uint64_t tag = StreamSeed(task.cfg.seed, kTagSampler);
  for (std::size_t d = 0; d < settings_.sampler_draws; ++d) {
    const ProposalSet ps = TopKJointSample(pool, energy, prefix, T,
                                           settings_.sampler_proposals,
                                           StreamSeed(tag, d));
    counts[CompletionCode(ps.proposals.row(ps.chosen).subspan(p), V)] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(settings_.sampler_draws);
  const double tv = TotalVariation(counts, exact);
  return {"sampler_tv", tv < 0.05,
          "tv=" + Num(tv, 4) + " (< 0.05) draws=" +
              std::to_string(settings_.sampler_draws) + " proposals=" +
              std::to_string(settings_.sampler_proposals) + " k=|V|",
          Seconds(start)};
}

CheckResult Validator::GradientIntegrity() {
  const auto start = Clock::now();
  const std::size_t count = settings_.gradient_instances;
  const std::uint64_t tag = StreamSeed(settings_.toy.seed, kTagGradient);
  double max_neural = 0.0;
  double max_pooled = 0.0;
  double max_nce = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(StreamSeed(tag, i));
    const std::size_t V = Between(rng, 2, 7);
    {
      NeuralLM lm = RandomNeural(rng, V, 0.5);
      const std::shared_ptr<NGramLM> base = i % 2 ? RandomNGram(rng, V) : nullptr;
      const Tokens seq = RandomTokens(rng, Between(rng, 2, 7), V);
      const std::size_t pos = Between(rng, 0, seq.size() - 1);
      std::vector<double> analytic(lm.num_params(), 0.0);
      lm.LossAndGrad(seq, pos, base.get(), 1.0, analytic);
      std::vector<double> scratch(lm.num_params());
      const auto numeric = NumericGrad(lm.params(), [&] {
        return lm.LossAndGrad(seq, pos, base.get(), 1.0, scratch);
      });
      max_neural = std::max(max_neural, GradientError(analytic, numeric));
    }
    const Direction dir = i % 2 ? Direction::kCausal : Direction::kBidirectional;
    {
      PooledScorer energy = RandomScorer(rng, V, dir, 0.5);
      const std::size_t T = Between(rng, 2, 8);
      const std::size_t p = Between(rng, 0, T - 1);
      const Tokens seq = RandomTokens(rng, T, V);
      const std::vector<double> analytic = energy.ParamGrad(seq, p);
      const auto numeric =
          NumericGrad(energy.params(), [&] { return energy.Energy(seq, p); });
      max_pooled = std::max(max_pooled, GradientError(analytic, numeric));
    }
    {
      PooledScorer energy = RandomScorer(rng, V, dir, 0.5);
      const std::size_t T = Between(rng, 2, 6);
      const std::size_t p = Between(rng, 0, T - 1);
      std::vector<Tokens> pos(Between(rng, 1, 4));
      std::vector<Tokens> neg(Between(rng, 1, 4));
      for (Tokens& s : pos) s = RandomTokens(rng, T, V);
      for (Tokens& s : neg) s = RandomTokens(rng, T, V);
      auto loss = [&] {
        std::vector<double> ep, en;
        for (const Tokens& s : pos) ep.push_back(energy.Energy(s, p));
        for (const Tokens& s : neg) en.push_back(energy.Energy(s, p));
        return NceLoss(ep, en);
      };
      std::vector<double> ep, en;
      for (const Tokens& s : pos) ep.push_back(energy.Energy(s, p));
      for (const Tokens& s : neg) en.push_back(energy.Energy(s, p));
      std::vector<double> dp(ep.size()), dn(en.size());
      NceLossGrad(ep, en, dp, dn);
      std::vector<double> analytic(energy.num_params(), 0.0);
      for (std::size_t j = 0; j < pos.size(); ++j) {
        energy.AccumulateGrad(pos[j], p, dp[j], analytic);
      }
      for (std::size_t j = 0; j < neg.size(); ++j) {
        energy.AccumulateGrad(neg[j], p, dn[j], analytic);
      }
      const auto numeric = NumericGrad(energy.params(), loss);
      max_nce = std::max(max_nce, GradientError(analytic, numeric));
    }
  }
  const bool ok = max_neural < kGradientTolerance && max_pooled < kGradientTolerance &&
                  max_nce < kGradientTolerance;
  std::ostringstream d;
  d << count << " instances each, max relative error (< 1e-4): neural_lm="
    << Num(max_neural, 3) << " pooled_energy=" << Num(max_pooled, 3)
    << " nce_chain=" << Num(max_nce, 3);
  return {"gradient_integrity", ok, d.str(), Seconds(start)};
}

CheckResult Validator::PplDirection() {
  const auto start = Clock::now();
  const ToyTask& task = toy();
  const PooledScorer& energy = pooled();
  const PrefixDataset held = ToyHeldoutSet(task);
  const PplBounds joint =
      EstimatePplBounds(*task.base_lm, energy, held, settings_.ppl_samples,
                        StreamSeed(task.cfg.seed, kTagPpl));
  const double base = ExactLmPpl(*task.base_lm, held);
  const double data = ExactLmPpl(*task.data_lm, held);
  std::ostringstream d;
  d << "held-out " << held.size() << " sequences: joint ppl in ["
    << Num(joint.lower_ppl, 6) << ", " << Num(joint.upper_ppl, 6)
    << "] base ppl=" << Num(base, 6) << " data ppl=" << Num(data, 6)
    << " n=" << settings_.ppl_samples;
  return {"ppl_direction", joint.upper_ppl < base, d.str(), Seconds(start)};
}

CheckResult Validator::Normalization() {
  const auto start = Clock::now();
  const std::uint64_t tag = StreamSeed(settings_.toy.seed, kTagNormalization);
  constexpr std::size_t kKinds = 6;
  static const char* const kNames[kKinds] = {"ngram", "neural", "ralm",
                                             "joint", "resample", "last_step"};
  std::vector<double> worst(kKinds, 0.0);
  std::vector<std::size_t> cases(kKinds, 0);
  for (std::size_t i = 0; i < settings_.normalization_cases; ++i) {
    std::mt19937_64 rng(StreamSeed(tag, i));
    const std::size_t kind = i % kKinds;
    double total = 0.0;
    if (kind <= 2) {
      const std::size_t V = Between(rng, 2, 40);
      const Tokens hist = RandomTokens(rng, Between(rng, 0, 6), V);
      std::shared_ptr<const LanguageModel> lm;
      if (kind == 0) {
        lm = RandomNGram(rng, V);
      } else {
        auto neural = std::make_shared<NeuralLM>(RandomNeural(rng, V, Uniform(rng, 0.1, 5.0)));
        if (kind == 1) {
          lm = neural;
        } else {
          lm = std::make_shared<Ralm>(RandomNGram(rng, V), neural);
        }
      }
      total = SumExp(lm->NextLogProbs(hist));
    } else if (kind == 4) {
      std::vector<double> e(Between(rng, 1, 300));
      const double scale = std::pow(10.0, Uniform(rng, -2.0, 3.0));
      for (double& x : e) x = Uniform(rng, -scale, scale);
      for (double w : ResampleWeights(e)) total += w;
    } else {
      const std::size_t V = Between(rng, 2, 4);
      const std::size_t p = Between(rng, 0, 2);
      const std::size_t T = p + Between(rng, 1, 3);
      const auto lm = RandomNGram(rng, V);
      const PooledScorer energy = RandomScorer(
          rng, V, rng() % 2 ? Direction::kCausal : Direction::kBidirectional,
          Uniform(rng, 0.1, 3.0));
      if (kind == 3) {
        const Tokens prefix = RandomTokens(rng, p, V);
        for (double q : ExactJointDistribution(*lm, energy, prefix, T)) total += q;
      } else {
        const Tokens hist = RandomTokens(rng, T - 1, V);
        total = SumExp(ExactLastStepLogProbs(*lm, energy, hist, std::min(p, T - 1)));
      }
    }
    worst[kind] = std::max(worst[kind], std::abs(total - 1.0));
    ++cases[kind];
  }
  bool ok = true;
  std::ostringstream d;
  d << settings_.normalization_cases << " cases, max |sum - 1| (<= 1e-9):";
  for (std::size_t k = 0; k < kKinds; ++k) {
    ok = ok && worst[k] <= kNormalizationTolerance;
    d << ' ' << kNames[k] << '=' << Num(worst[k], 3) << " (" << cases[k] << ')';
  }
  return {"normalization", ok, d.str(), Seconds(start)};
}

CheckResult Validator::NgramHandCounts() {
  const auto start = Clock::now();
  struct Case {
    Tokens tokens;
    std::size_t n;
    double expected;
  };
  const std::vector<Case> cases = {
      {{1, 1, 1, 1}, 1, 25.0},
      {{1, 2, 3, 4}, 1, 100.0},
      {{1, 2, 1, 2}, 2, 200.0 / 3.0},
  };
  bool ok = true;
  std::ostringstream d;
  for (const Case& c : cases) {
    const double got = UniqueNgramPct(std::vector<Tokens>{c.tokens}, c.n);
    ok = ok && got == c.expected;
    d << (d.tellp() > 0 ? " " : "") << "n=" << c.n << ':' << Num(got, 10)
      << (got == c.expected ? " ok" : " MISMATCH");
  }
  return {"ngram_hand_counts", ok, d.str(), Seconds(start)};
}

CheckResult Validator::RepetitionDiversity() {
  const auto start = Clock::now();
  const RepetitionConfig& cfg = settings_.rep;
  const RepetitionTask task = BuildRepetitionTask(cfg);
  const std::unique_ptr<PooledScorer> energy = TrainRepetitionScorer(task);
  kernels::SamplerPool pool(*task.base_lm, cfg.top_k);
  TopKSampler base_sampler(*task.base_lm, cfg.top_k);
  const std::uint64_t joint_tag = StreamSeed(cfg.seed, kTagRepetitionJoint);
  const std::uint64_t base_tag = StreamSeed(cfg.seed, kTagRepetitionBase);
  const std::size_t p = cfg.prefix_len;
  std::vector<Tokens> joint, base;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const auto prefix = task.train.prefix(i % task.train.size());
    const ProposalSet ps = TopKJointSample(pool, *energy, prefix, cfg.seq_len,
                                           cfg.proposals, StreamSeed(joint_tag, i));
    const auto row = ps.proposals.row(ps.chosen);
    joint.emplace_back(row.begin() + p, row.end());
    Tokens seq(prefix.begin(), prefix.end());
    seq.resize(cfg.seq_len);
    SplitMix64 rng(StreamSeed(base_tag, i));
    base_sampler.Complete(seq, p, rng);
    base.emplace_back(seq.begin() + p, seq.end());
  }
  auto repeat_rate = [](const std::vector<Tokens>& s) {
    std::size_t rep = 0, total = 0;
    for (const Tokens& x : s) {
      for (std::size_t i = 1; i < x.size(); ++i) {
        rep += x[i] == x[i - 1];
        ++total;
      }
    }
    return static_cast<double>(rep) / static_cast<double>(total);
  };
  const double uj = UniqueNgramPct(joint, 2);
  const double ub = UniqueNgramPct(base, 2);
  std::ostringstream d;
  d << cfg.samples << " samples each: unique 2-gram joint=" << Num(uj, 5)
    << "% base=" << Num(ub, 5) << "% adjacent repeat rate joint="
    << Num(repeat_rate(joint), 4) << " base=" << Num(repeat_rate(base), 4);
  return {"repetition_diversity", uj >= ub, d.str(), Seconds(start)};
}

CheckResult Validator::Reproducibility(const std::filesystem::path& work_dir,
                                       const std::filesystem::path& toy_config) {
  namespace fs = std::filesystem;
  const auto start = Clock::now();
  const ToyTask& task = toy();
  fs::create_directories(work_dir);
  const fs::path corpus = work_dir / "corpus.txt";
  {
    std::ofstream f(corpus, std::ios::binary);
    for (const std::string& line :
         ToyCorpusLines(task, 600, StreamSeed(task.cfg.seed, kTagCorpus))) {
      f << line << '\n';
    }
  }
  // Reduced oracle suite so three runs stay quick.
  const fs::path oracle_cfg = work_dir / "oracle.cfg";
  {
    Config c = Config::Load(toy_config);
    const std::pair<const char*, const char*> overrides[] = {
        {"base_train_samples", "1000"}, {"positives_per_prefix", "400"},
        {"negatives_per_prefix", "400"}, {"tabular_steps", "400"},
        {"tabular_batch", "256"},        {"pooled_train_sequences", "1000"},
        {"nce_steps", "300"},            {"sandwich_trials", "20"},
        {"sandwich_n", "8,64"},          {"bias_n", "8,64"},
        {"sampler_draws", "200"},        {"sampler_proposals", "200"},
        {"normalization_cases", "60"},
    };
    for (const auto& [k, v] : overrides) c.Set(k, v);
    std::ofstream f(oracle_cfg, std::ios::binary);
    for (const auto& [k, v] : c.values()) f << k << " = " << v << '\n';
  }

  const std::string c = corpus.string();
  std::vector<std::string> runs;
  std::string failure;
  const int thread_counts[] = {1, 1, 4};
  for (std::size_t r = 0; r < 3 && failure.empty(); ++r) {
    const fs::path dir = work_dir / ("run" + std::to_string(r));
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto at = [&](const char* name) { return (dir / name).string(); };
    const std::vector<std::string> common = {
        "--seed", "7", "--threads", std::to_string(thread_counts[r])};
    const std::vector<std::string> data = {
        "--corpus", c, "--vocab", at("vocab.txt"), "--prefix-len", "2",
        "--seq-len", "5"};
    auto join = [](std::vector<std::string> a, const std::vector<std::string>& b) {
      a.insert(a.end(), b.begin(), b.end());
      return a;
    };
    const std::vector<std::vector<std::string>> commands = {
        {"build-vocab", "--corpus", c, "--vocab-out", at("vocab.txt")},
        join({"train-lm", "--lm-kind", "ngram", "--order", "2", "--lm-out",
              at("base.ckpt")}, data),
        join({"train-lm", "--lm-kind", "neural", "--lm-steps", "200", "--lm-out",
              at("neural.ckpt"), "--loss-out", at("neural_loss.csv")}, data),
        join({"train-lm", "--lm-kind", "ralm", "--base-lm", at("base.ckpt"),
              "--lm-steps", "200", "--lm-out", at("ralm.ckpt"), "--loss-out",
              at("ralm_loss.csv")}, data),
        join({"gen-negatives", "--lm", at("base.ckpt"), "--num-negatives", "4",
              "--negatives-out", at("negatives.bin")}, data),
        join({"train-ebm", "--negatives", at("negatives.bin"), "--nce-steps",
              "300", "--energy-out", at("pooled.ckpt"), "--loss-out",
              at("nce_loss.csv")}, data),
        join({"train-ebm", "--negatives", at("negatives.bin"), "--energy-kind",
              "tabular", "--tabular-cap", "216", "--nce-steps", "300",
              "--energy-out", at("tabular.ckpt")}, data),
        join({"eval-ppl", "--lm", at("base.ckpt"), "--energy", at("pooled.ckpt"),
              "--num-samples", "200", "--report-out", at("ppl.csv")}, data),
        join({"eval-steps", "--lm", at("ralm.ckpt"), "--energy",
              at("tabular.ckpt"), "--num-samples", "200", "--item", "3",
              "--report-out", at("steps.csv")}, data),
        {"sample", "--vocab", at("vocab.txt"), "--lm", at("base.ckpt"),
         "--energy", at("pooled.ckpt"), "--prefix", "a b", "--seq-len", "5",
         "--proposals", "32", "--num-outputs", "5", "--out", at("samples.txt"),
         "--diagnostics-out", at("diagnostics.csv")},
        join({"analyze", "--report", "ngrams", "--inputs",
              "real=" + c + ",samples=" + c, "--report-out", at("ngrams.csv")},
             data),
        join({"analyze", "--report", "density", "--inputs", "real=" + c,
              "--lm", at("base.ckpt"), "--energy", at("pooled.ckpt"),
              "--num-samples", "100", "--report-out", at("density.csv")}, data),
        join({"analyze", "--report", "sweep", "--lm", at("base.ckpt"),
              "--energy", at("pooled.ckpt"), "--sweep-n", "8,64", "--trials",
              "3", "--report-out", at("sweep.csv")}, data),
        {"oracle-check", "--config", oracle_cfg.string()},
    };
    std::ostringstream transcript;
    for (const auto& cmd : commands) {
      std::ostringstream out, err;
      const int code = cli::Dispatch(join(cmd, common), out, err);
      transcript << "$ " << cmd.front() << " -> " << code << '\n'
                 << out.str() << err.str();
      if (code != cli::kExitOk && cmd.front() != "oracle-check") {
        failure = cmd.front() + " exited " + std::to_string(code) + ": " + err.str();
        break;
      }
    }
    std::ofstream(dir / "transcript.txt", std::ios::binary) << transcript.str();
    runs.push_back(dir.string());
  }
  if (!failure.empty()) {
    return {"reproducibility", false, failure, Seconds(start)};
  }
  auto read = [](const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
  };
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(runs[0])) {
    names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  std::vector<std::string> differing;
  for (const std::string& name : names) {
    const std::string ref = read(fs::path(runs[0]) / name);
    for (std::size_t r = 1; r < runs.size(); ++r) {
      const fs::path other = fs::path(runs[r]) / name;
      if (!fs::exists(other) || read(other) != ref) {
        differing.push_back(name + "@run" + std::to_string(r));
      }
    }
  }
  std::ostringstream d;
  d << names.size() << " artifacts compared across threads 1, 1, 4";
  if (differing.empty()) {
    d << ": byte-identical";
  } else {
    d << ": differing";
    for (const std::string& n : differing) d << ' ' << n;
  }
  return {"reproducibility", differing.empty(), d.str(), Seconds(start)};
}

std::vector<CheckResult> Validator::OracleSuite() {
  std::vector<CheckResult> out;
  out.push_back(OptimumRecovery());
  out.push_back(LogZSandwich(settings_.sandwich_n));
  out.push_back(BiasShrinkage(settings_.bias_n, BiasEstimate::kControlVariate));
  out.push_back(LastStepExact());
  out.push_back(SamplerCorrectness());
  out.push_back(Normalization());
  out.push_back(NgramHandCounts());
  return out;
}

}  // namespace resebm
