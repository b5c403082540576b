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

#include "resebm/toy_task.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "resebm/estimation.h"
#include "resebm/kernels.h"
#include "resebm/random.h"

namespace resebm {

namespace {

// Stream tags for the toy pipeline.
enum : std::uint64_t {
  kSeedDataLm = 1,
  kSeedBaseSamples,
  kSeedPositives,
  kSeedNegatives,
  kSeedTabularNce,
  kSeedPooledData,
  kSeedPooledNegatives,
  kSeedPooledInit,
  kSeedPooledNce,
  kSeedHeldout,
};

constexpr double kRowMass = 1e6;
constexpr double kTinyAlpha = 1e-6;

void AddRandomRow(NGramLM& lm, const Tokens& ctx, const NGramShape& shape,
                  std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t V = shape.vocab_size;
  std::vector<double> w(V);
  double total = 0.0;
  for (std::size_t v = 0; v < V; ++v) {
    w[v] = std::exp(shape.peak * normal(gen));
    const bool excluded =
        (shape.never_unknown && v == Vocabulary::kUnknownId) ||
        (shape.never_repeat && !ctx.empty() && ctx.back() == v);
    if (excluded) w[v] = 0.0;
    total += w[v];
  }
  for (std::size_t v = 0; v < V; ++v) {
    if (w[v] > 0.0) {
      lm.AddCount(ctx, static_cast<TokenId>(v), kRowMass * w[v] / total);
    }
  }
}

void AddRowsRecursive(NGramLM& lm, Tokens& ctx, std::size_t max_len,
                      const NGramShape& shape, std::mt19937_64& gen) {
  AddRandomRow(lm, ctx, shape, gen);
  if (ctx.size() == max_len) return;
  for (std::size_t v = 0; v < shape.vocab_size; ++v) {
    ctx.push_back(static_cast<TokenId>(v));
    AddRowsRecursive(lm, ctx, max_len, shape, gen);
    ctx.pop_back();
  }
}

PrefixDataset AsDataset(SequenceBatch batch, std::size_t p) {
  PrefixDataset d;
  d.prefix_len = p;
  d.seq_len = batch.length();
  d.items = std::move(batch);
  return d;
}

std::size_t NegativesPerItem(std::size_t negatives, std::size_t positives) {
  if (positives == 0 || negatives < positives || negatives % positives != 0) {
    throw ConfigError("negatives_per_prefix",
                      "must be a positive multiple of positives_per_prefix");
  }
  return negatives / positives;
}

}  // namespace

std::shared_ptr<NGramLM> MakeRandomNGram(const NGramShape& shape,
                                         std::uint64_t seed) {
  auto lm = std::make_shared<NGramLM>(shape.vocab_size, shape.order, kTinyAlpha);
  std::mt19937_64 gen(seed);
  Tokens ctx;
  AddRowsRecursive(*lm, ctx, shape.order - 1, shape, gen);
  return lm;
}

SequenceBatch SampleSequences(const LanguageModel& lm,
                              std::span<const TokenId> history, std::size_t T,
                              std::size_t count, std::size_t k,
                              std::uint64_t seed) {
  return kernels::DrawCompletions(lm, history, T, count, k, seed).sequences;
}

ToyConfig ToyConfig::FromConfig(const Config& c) {
  ToyConfig t;
  t.vocab_size = c.GetUint("vocab_size", t.vocab_size, 2);
  t.prefix_len = c.GetUint("prefix_len", t.prefix_len, 1);
  t.seq_len = c.GetUint("seq_len", t.seq_len, t.prefix_len + 1);
  t.enum_cap = c.GetUint("enum_cap", t.enum_cap, 1);
  t.data_peak = c.GetPositive("data_peak", t.data_peak);
  t.base_order = c.GetUint("base_order", t.base_order, 1);
  t.base_alpha = c.GetPositive("base_alpha", t.base_alpha);
  t.base_train_samples = c.GetUint("base_train_samples", t.base_train_samples, 1);
  t.num_prefixes = c.GetUint("toy_prefixes", t.num_prefixes, 1);
  t.positives_per_prefix =
      c.GetUint("positives_per_prefix", t.positives_per_prefix, 1);
  t.negatives_per_prefix =
      c.GetUint("negatives_per_prefix", t.negatives_per_prefix, 1);
  NegativesPerItem(t.negatives_per_prefix, t.positives_per_prefix);
  t.tabular_nce.lr = c.GetPositive("tabular_lr", t.tabular_nce.lr);
  t.tabular_nce.steps = c.GetUint("tabular_steps", t.tabular_nce.steps, 1);
  t.tabular_nce.batch = c.GetUint("tabular_batch", t.tabular_nce.batch, 1);
  t.pooled_train_sequences =
      c.GetUint("pooled_train_sequences", t.pooled_train_sequences, 1);
  t.pooled_shape.vocab_size = t.vocab_size;
  t.pooled_shape.embed_dim = c.GetUint("ebm_embed_dim", t.pooled_shape.embed_dim, 1);
  t.pooled_shape.window = c.GetUint("ebm_window", t.pooled_shape.window);
  t.pooled_shape.hidden_dim =
      c.GetUint("ebm_hidden_dim", t.pooled_shape.hidden_dim, 1);
  try {
    t.pooled_shape.direction = ParseDirection(
        c.GetString("direction", std::string(DirectionName(t.pooled_shape.direction))));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("direction", e.what());
  }
  t.pooled_nce.lr = c.GetPositive("nce_lr", t.pooled_nce.lr);
  t.pooled_nce.steps = c.GetUint("nce_steps", t.pooled_nce.steps, 1);
  t.pooled_nce.batch = c.GetUint("nce_batch", t.pooled_nce.batch, 1);
  t.pooled_nce.negatives_per_positive =
      c.GetUint("negatives_per_positive", t.pooled_nce.negatives_per_positive, 1);
  t.pooled_nce.clip_norm = c.GetPositive("clip_norm", t.pooled_nce.clip_norm);
  t.tabular_nce.clip_norm = t.pooled_nce.clip_norm;
  t.heldout_sequences = c.GetUint("heldout_sequences", t.heldout_sequences, 1);
  t.seed = c.GetUint("seed", t.seed);
  return t;
}

ToyTask BuildToyTask(const ToyConfig& cfg) {
  ToyTask task;
  task.cfg = cfg;
  const std::size_t V = cfg.vocab_size;
  task.data_lm = MakeRandomNGram({V, 2, cfg.data_peak, true, false},
                                 StreamSeed(cfg.seed, kSeedDataLm));
  const SequenceBatch base_data =
      SampleSequences(*task.data_lm, {}, cfg.seq_len, cfg.base_train_samples, V,
                      StreamSeed(cfg.seed, kSeedBaseSamples));
  task.base_lm = std::make_shared<NGramLM>(
      FitNGram(base_data, V, cfg.base_order, cfg.base_alpha));

  const Enumeration all =
      EnumerateCompletions(*task.data_lm, {}, cfg.prefix_len, 1u << 20);
  std::vector<std::size_t> order(all.log_p_lm.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return all.log_p_lm[a] > all.log_p_lm[b];
  });
  const std::size_t count = std::min(cfg.num_prefixes, order.size());
  task.positives = AsDataset(SequenceBatch(cfg.seq_len), cfg.prefix_len);
  for (std::size_t j = 0; j < count; ++j) {
    const auto row = all.sequences.row(order[j]);
    task.prefixes.emplace_back(row.begin(), row.end());
    const SequenceBatch pos = SampleSequences(
        *task.data_lm, task.prefixes.back(), cfg.seq_len,
        cfg.positives_per_prefix, V, StreamSeed(StreamSeed(cfg.seed, kSeedPositives), j));
    for (std::size_t i = 0; i < pos.size(); ++i) task.positives.items.push_back(pos.row(i));
  }
  return task;
}

NegativeSet ToyNegatives(const ToyTask& task) {
  const std::size_t m = NegativesPerItem(task.cfg.negatives_per_prefix,
                                         task.cfg.positives_per_prefix);
  return PregenerateNegatives(*task.base_lm, task.positives, m,
                              task.cfg.vocab_size,
                              StreamSeed(task.cfg.seed, kSeedNegatives));
}

std::unique_ptr<TabularEnergy> TrainToyTabular(const ToyTask& task,
                                               std::vector<double>* curve) {
  auto energy = std::make_unique<TabularEnergy>(
      task.cfg.vocab_size, task.cfg.prefix_len, task.cfg.seq_len,
      task.prefixes, task.cfg.enum_cap);
  NceConfig nce = task.cfg.tabular_nce;
  nce.seed = StreamSeed(task.cfg.seed, kSeedTabularNce);
  const NegativeSet negs = ToyNegatives(task);
  std::vector<double> c = TrainEnergyNce(*energy, task.positives, negs, nce);
  if (curve) *curve = std::move(c);
  return energy;
}

PrefixDataset ToyTrainingSet(const ToyTask& task) {
  return AsDataset(SampleSequences(*task.data_lm, {}, task.cfg.seq_len,
                                   task.cfg.pooled_train_sequences,
                                   task.cfg.vocab_size,
                                   StreamSeed(task.cfg.seed, kSeedPooledData)),
                   task.cfg.prefix_len);
}

PrefixDataset ToyHeldoutSet(const ToyTask& task) {
  return AsDataset(SampleSequences(*task.data_lm, {}, task.cfg.seq_len,
                                   task.cfg.heldout_sequences,
                                   task.cfg.vocab_size,
                                   StreamSeed(task.cfg.seed, kSeedHeldout)),
                   task.cfg.prefix_len);
}

std::unique_ptr<PooledScorer> TrainToyPooled(const ToyTask& task,
                                             std::vector<double>* curve) {
  const PrefixDataset train = ToyTrainingSet(task);
  const NegativeSet negs = PregenerateNegatives(
      *task.base_lm, train, task.cfg.pooled_nce.negatives_per_positive,
      task.cfg.vocab_size, StreamSeed(task.cfg.seed, kSeedPooledNegatives));
  PooledScorerShape shape = task.cfg.pooled_shape;
  shape.vocab_size = task.cfg.vocab_size;
  auto energy = std::make_unique<PooledScorer>(
      shape, StreamSeed(task.cfg.seed, kSeedPooledInit));
  NceConfig nce = task.cfg.pooled_nce;
  nce.seed = StreamSeed(task.cfg.seed, kSeedPooledNce);
  std::vector<double> c = TrainEnergyNce(*energy, train, negs, nce);
  if (curve) *curve = std::move(c);
  return energy;
}

std::vector<double> ToyDataDistribution(const ToyTask& task,
                                        std::span<const TokenId> prefix) {
  const Enumeration all =
      EnumerateCompletions(*task.data_lm, prefix, task.cfg.seq_len, task.cfg.enum_cap);
  std::vector<double> probs(all.log_p_lm.size());
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(all.log_p_lm[i]);
  return probs;
}

std::vector<std::string> ToyCorpusLines(const ToyTask& task, std::size_t count,
                                        std::uint64_t seed) {
  const SequenceBatch seqs = SampleSequences(*task.data_lm, {}, task.cfg.seq_len,
                                             count, task.cfg.vocab_size, seed);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    std::string line;
    for (TokenId id : seqs.row(i)) {
      if (!line.empty()) line += ' ';
      line += id == 0 ? std::string(Vocabulary::kUnknownToken)
                      : std::string(1, static_cast<char>('a' + (id - 1) % 26));
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

RepetitionConfig RepetitionConfig::FromConfig(const Config& c) {
  RepetitionConfig r;
  r.vocab_size = c.GetUint("rep_vocab_size", r.vocab_size, 3);
  r.prefix_len = c.GetUint("rep_prefix_len", r.prefix_len, 1);
  r.seq_len = c.GetUint("rep_seq_len", r.seq_len, r.prefix_len + 2);
  r.data_peak = c.GetPositive("rep_data_peak", r.data_peak);
  r.rho = c.GetPositive("rep_rho", r.rho);
  if (r.rho >= 1.0) throw ConfigError("rep_rho", "must be below 1");
  r.train_sequences = c.GetUint("rep_train_sequences", r.train_sequences, 1);
  r.shape.vocab_size = r.vocab_size;
  r.shape.embed_dim = c.GetUint("rep_embed_dim", r.shape.embed_dim, 1);
  r.shape.window = c.GetUint("rep_window", r.shape.window);
  r.shape.hidden_dim = c.GetUint("rep_hidden_dim", r.shape.hidden_dim, 1);
  try {
    r.shape.direction = ParseDirection(
        c.GetString("rep_direction", std::string(DirectionName(r.shape.direction))));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("rep_direction", e.what());
  }
  r.nce.lr = c.GetPositive("rep_lr", r.nce.lr);
  r.nce.steps = c.GetUint("rep_steps", r.nce.steps, 1);
  r.nce.batch = c.GetUint("rep_batch", r.nce.batch, 1);
  r.nce.clip_norm = c.GetPositive("clip_norm", r.nce.clip_norm);
  r.samples = c.GetUint("rep_samples", r.samples, 1);
  r.proposals = c.GetUint("rep_proposals", r.proposals, 1);
  r.top_k = c.GetUint("rep_top_k", r.top_k, 1);
  if (r.top_k > r.vocab_size) throw ConfigError("rep_top_k", "exceeds vocabulary");
  r.seed = c.GetUint("seed", r.seed);
  return r;
}

RepetitionTask BuildRepetitionTask(const RepetitionConfig& cfg) {
  RepetitionTask task;
  task.cfg = cfg;
  const std::size_t V = cfg.vocab_size;
  task.data_lm = MakeRandomNGram({V, 2, cfg.data_peak, true, true},
                                 StreamSeed(cfg.seed, kSeedDataLm));
  task.base_lm = std::make_shared<NGramLM>(V, 2, kTinyAlpha);
  // Row mixture: rho on the previous token, the rest follows A.
  for (const auto& [ctx, counts] : task.data_lm->counts()) {
    double total = 0.0;
    for (double c : counts) total += c;
    for (std::size_t v = 0; v < V; ++v) {
      double w = (1.0 - cfg.rho) * counts[v] / total;
      if (!ctx.empty() && ctx.back() == v) w += cfg.rho;
      if (w > 0.0) task.base_lm->AddCount(ctx, static_cast<TokenId>(v), kRowMass * w);
    }
  }
  task.train = AsDataset(SampleSequences(*task.data_lm, {}, cfg.seq_len,
                                         cfg.train_sequences, V,
                                         StreamSeed(cfg.seed, kSeedPooledData)),
                         cfg.prefix_len);
  return task;
}

std::unique_ptr<PooledScorer> TrainRepetitionScorer(const RepetitionTask& task,
                                                    std::vector<double>* curve) {
  const NegativeSet negs = PregenerateNegatives(
      *task.base_lm, task.train, 1, task.cfg.vocab_size,
      StreamSeed(task.cfg.seed, kSeedPooledNegatives));
  auto energy = std::make_unique<PooledScorer>(
      task.cfg.shape, StreamSeed(task.cfg.seed, kSeedPooledInit));
  NceConfig nce = task.cfg.nce;
  nce.seed = StreamSeed(task.cfg.seed, kSeedPooledNce);
  std::vector<double> c = TrainEnergyNce(*energy, task.train, negs, nce);
  if (curve) *curve = std::move(c);
  return energy;
}

}  // namespace resebm
