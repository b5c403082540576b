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

#include "resebm/cli.h"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "resebm/analysis.h"
#include "resebm/checkpoint.h"
#include "resebm/config.h"
#include "resebm/corpus.h"
#include "resebm/estimation.h"
#include "resebm/kernels.h"
#include "resebm/neural_lm.h"
#include "resebm/ngram_lm.h"
#include "resebm/ralm.h"
#include "resebm/sampling.h"
#include "resebm/training.h"
#include "resebm/validation.h"

namespace resebm::cli {

namespace {

struct KeyInfo {
  const char* name;
  const char* help;
};

// Every key with its documented default.
constexpr KeyInfo kKeys[] = {
    {"seed", "random seed (default: 1)"},
    {"config", "configuration file of `key = value` lines"},
    {"threads", "worker threads; 0 keeps the OpenMP default (default: 0)"},
    {"corpus", "UTF-8 corpus, one sequence per line"},
    {"vocab", "vocabulary file, one token per line"},
    {"mode", "tokenization: whitespace or char (default: whitespace)"},
    {"prefix_len", "prefix length p (default: 8)"},
    {"seq_len", "total sequence length T (default: 16)"},
    {"max_vocab", "vocabulary size cap including <unk> (default: 512)"},
    {"vocab_out", "output vocabulary file"},
    {"lm_kind", "ngram, neural or ralm (default: ngram)"},
    {"order", "n-gram order (default: 2)"},
    {"alpha", "n-gram additive smoothing (default: 1)"},
    {"lm_embed_dim", "neural LM embedding size (default: 8)"},
    {"lm_context_window", "neural LM context tokens (default: 2)"},
    {"lm_hidden_dim", "neural LM hidden units (default: 16)"},
    {"lm_lr", "neural LM learning rate (default: 0.1)"},
    {"lm_steps", "neural LM SGD steps (default: 1000)"},
    {"lm_batch", "neural LM positions per step (default: 32)"},
    {"clip_norm", "gradient norm clipping threshold (default: 10)"},
    {"base_lm", "frozen base checkpoint for lm_kind = ralm"},
    {"lm_out", "output language-model checkpoint"},
    {"loss_out", "optional loss-curve CSV"},
    {"lm", "language-model checkpoint"},
    {"num_negatives", "negatives per dataset item (default: 16)"},
    {"top_k", "top-k truncation; 0 means |V| (default: 0)"},
    {"negatives_out", "output negative-set file"},
    {"negatives", "negative-set file"},
    {"energy_kind", "pooled or tabular (default: pooled)"},
    {"direction", "pooled scorer window: causal or bidirectional "
                  "(default: bidirectional)"},
    {"ebm_embed_dim", "pooled scorer embedding size (default: 8)"},
    {"ebm_window", "pooled scorer window half-width (default: 1)"},
    {"ebm_hidden_dim", "pooled scorer hidden units (default: 16)"},
    {"tabular_cap", "tabular completions per prefix cap (default: 65536)"},
    {"nce_lr", "NCE learning rate (default: 0.5)"},
    {"nce_steps", "NCE SGD steps (default: 4000)"},
    {"nce_batch", "positives per NCE step (default: 64)"},
    {"negatives_per_positive", "cached negatives drawn per positive "
                               "(default: 1)"},
    {"energy_out", "output energy checkpoint"},
    {"energy", "energy checkpoint"},
    {"num_samples", "Monte Carlo samples per log-partition estimate "
                    "(default: 10000)"},
    {"report_out", "output report; standard output when unset"},
    {"item", "dataset item scored by eval-steps (default: 0)"},
    {"enum_cap", "largest enumeration for exact values (default: 65536)"},
    {"prefix", "prefix text to continue"},
    {"proposals", "proposals per joint sample (default: 64)"},
    {"num_outputs", "generated sequences (default: 1)"},
    {"out", "output text file; standard output when unset"},
    {"diagnostics_out", "optional proposal diagnostics CSV for the first "
                        "output"},
    {"report", "ngrams, density or sweep"},
    {"inputs", "comma-separated name=path corpus list"},
    {"ngram_sizes", "n-gram sizes (default: 1 up to min(4, T - p))"},
    {"bins", "histogram bins (default: 20)"},
    {"sweep_n", "ascending sample counts (default: 8,64,512)"},
    {"trials", "seeded repeats per sample count (default: 10)"},
    // Toy task and validation suite.
    {"vocab_size", "toy vocabulary size including <unk> (default: 6)"},
    {"data_peak", "toy data LM peakedness (default: 3)"},
    {"base_order", "toy base LM order (default: 2)"},
    {"base_alpha", "toy base LM smoothing (default: 200)"},
    {"base_train_samples", "toy base LM training samples (default: 5000)"},
    {"toy_prefixes", "toy prefixes, most probable first (default: 4)"},
    {"positives_per_prefix", "toy positives per prefix (default: 10000)"},
    {"negatives_per_prefix", "toy negatives per prefix (default: 10000)"},
    {"tabular_lr", "toy tabular NCE learning rate (default: 10)"},
    {"tabular_steps", "toy tabular NCE steps (default: 20000)"},
    {"tabular_batch", "toy tabular NCE batch (default: 2048)"},
    {"pooled_train_sequences", "toy pooled scorer positives (default: 20000)"},
    {"heldout_sequences", "toy held-out sequences (default: 1000)"},
    {"sandwich_trials", "seeded trials per n for log Z checks (default: 500)"},
    {"sandwich_n", "sample counts of the sandwich check (default: 8,64,512)"},
    {"bias_n", "sample counts of the bias check (default: 8,16,32,64,128)"},
    {"sampler_draws", "joint samples in the sampler check (default: 10000)"},
    {"sampler_proposals", "proposals per joint sample in the sampler check "
                          "(default: 10000)"},
    {"normalization_cases", "fuzzed normalization cases (default: 1000)"},
};

const std::map<std::string, std::vector<std::string>>& SubcommandKeys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"build-vocab", {"corpus", "mode", "max_vocab", "vocab_out"}},
      {"train-lm",
       {"corpus", "vocab", "mode", "prefix_len", "seq_len", "lm_kind", "order",
        "alpha", "lm_embed_dim", "lm_context_window", "lm_hidden_dim", "lm_lr",
        "lm_steps", "lm_batch", "clip_norm", "base_lm", "lm_out", "loss_out"}},
      {"gen-negatives",
       {"corpus", "vocab", "mode", "prefix_len", "seq_len", "lm",
        "num_negatives", "top_k", "negatives_out"}},
      {"train-ebm",
       {"corpus", "vocab", "mode", "prefix_len", "seq_len", "negatives",
        "energy_kind", "direction", "ebm_embed_dim", "ebm_window",
        "ebm_hidden_dim", "tabular_cap", "nce_lr", "nce_steps", "nce_batch",
        "negatives_per_positive", "clip_norm", "energy_out", "loss_out"}},
      {"eval-ppl",
       {"corpus", "vocab", "mode", "prefix_len", "seq_len", "lm", "energy",
        "num_samples", "report_out"}},
      {"eval-steps",
       {"corpus", "vocab", "mode", "prefix_len", "seq_len", "lm", "energy",
        "num_samples", "item", "enum_cap", "report_out"}},
      {"sample",
       {"vocab", "mode", "seq_len", "lm", "energy", "prefix", "proposals",
        "top_k", "num_outputs", "out", "diagnostics_out"}},
      {"analyze",
       {"report", "inputs", "corpus", "vocab", "mode", "prefix_len", "seq_len",
        "lm", "energy", "num_samples", "ngram_sizes", "bins", "sweep_n",
        "trials", "report_out"}},
      {"oracle-check",
       {"vocab_size", "prefix_len", "seq_len", "enum_cap", "data_peak",
        "base_order", "base_alpha", "base_train_samples", "toy_prefixes",
        "positives_per_prefix", "negatives_per_prefix", "tabular_lr",
        "tabular_steps", "tabular_batch", "pooled_train_sequences",
        "ebm_embed_dim", "ebm_window", "ebm_hidden_dim", "direction", "nce_lr",
        "nce_steps", "nce_batch", "negatives_per_positive", "clip_norm",
        "heldout_sequences", "num_samples", "sandwich_trials", "sandwich_n",
        "bias_n", "sampler_draws", "sampler_proposals",
        "normalization_cases"}},
  };
  return keys;
}

const char* HelpFor(const std::string& key) {
  for (const KeyInfo& k : kKeys) {
    if (key == k.name) return k.help;
  }
  return "";
}

std::string Dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

// Restores the OpenMP thread count when a dispatch returns.
class ThreadGuard {
 public:
  ThreadGuard() : saved_(omp_get_max_threads()) {}
  ~ThreadGuard() { omp_set_num_threads(saved_); }

 private:
  int saved_;
};

TokenMode Mode(const Config& c) {
  try {
    return ParseTokenMode(c.GetString("mode", "whitespace"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("mode", e.what());
  }
}

std::size_t PrefixLen(const Config& c) { return c.GetUint("prefix_len", 8); }

std::size_t SeqLen(const Config& c) {
  const std::size_t T = c.GetUint("seq_len", 16, 1);
  if (PrefixLen(c) >= T) {
    throw ConfigError("prefix_len", "must be smaller than seq_len");
  }
  return T;
}

PrefixDataset LoadData(const Config& c, const Vocabulary& vocab,
                       std::ostream& err) {
  const LoadedDataset loaded = LoadPrefixDataset(
      c.RequireString("corpus"), vocab, PrefixLen(c), SeqLen(c), Mode(c));
  if (loaded.skipped_lines > 0) {
    err << "warning: skipped " << loaded.skipped_lines
        << " lines shorter than seq_len\n";
  }
  return loaded.data;
}

void WriteText(const Config& c, const std::string& key,
               const std::string& text, std::ostream& out) {
  const std::string path = c.GetString(key, "");
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

void WriteCurve(const Config& c, const std::vector<double>& curve) {
  const std::string path = c.GetString("loss_out", "");
  if (path.empty()) return;
  std::ostringstream s;
  s << "step,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    s << i << ',' << FormatReal(curve[i]) << '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << s.str();
}

void CheckVocab(const LanguageModel& lm, const Vocabulary& vocab) {
  if (lm.vocab_size() != vocab.size()) {
    throw std::runtime_error("model vocabulary size " +
                             std::to_string(lm.vocab_size()) +
                             " differs from vocabulary file size " +
                             std::to_string(vocab.size()));
  }
}

std::size_t TopK(const Config& c, std::size_t V) {
  const std::size_t k = c.GetUint("top_k", 0);
  if (k > V) throw ConfigError("top_k", "exceeds vocabulary size");
  return k == 0 ? V : k;
}

int RunBuildVocab(const Config& c, std::ostream&, std::ostream& err) {
  const std::size_t max_vocab = c.GetUint("max_vocab", 512, 2);
  const Vocabulary vocab =
      BuildVocab(ReadLines(c.RequireString("corpus")), Mode(c), max_vocab);
  vocab.Save(c.RequireString("vocab_out"));
  err << "vocabulary of " << vocab.size() << " tokens\n";
  return kExitOk;
}

int RunTrainLm(const Config& c, std::ostream&, std::ostream& err) {
  const Vocabulary vocab = Vocabulary::Load(c.RequireString("vocab"));
  const PrefixDataset data = LoadData(c, vocab, err);
  const std::uint64_t seed = c.GetUint("seed", 1);
  const std::string kind = c.GetString("lm_kind", "ngram");
  const std::string out_path = c.RequireString("lm_out");
  const std::size_t V = vocab.size();
  if (kind == "ngram") {
    const NGramLM lm = FitNGram(data.items, V, c.GetUint("order", 2, 1),
                                c.GetPositive("alpha", 1.0));
    SaveLanguageModel(lm, seed, out_path);
    return kExitOk;
  }
  if (kind != "neural" && kind != "ralm") {
    throw ConfigError("lm_kind", "expected ngram, neural or ralm, got '" +
                                     kind + "'");
  }
  const NeuralLmShape shape{V, c.GetUint("lm_embed_dim", 8, 1),
                            c.GetUint("lm_context_window", 2),
                            c.GetUint("lm_hidden_dim", 16, 1)};
  const LmTrainConfig train{c.GetPositive("lm_lr", 0.1),
                            c.GetUint("lm_steps", 1000, 1),
                            c.GetUint("lm_batch", 32, 1),
                            c.GetPositive("clip_norm", 10.0),
                            StreamSeed(seed, 2)};
  auto residual = std::make_shared<NeuralLM>(shape, StreamSeed(seed, 1));
  std::vector<double> curve;
  if (kind == "neural") {
    curve = TrainNeuralLm(*residual, data.items, train);
    SaveLanguageModel(*residual, seed, out_path);
  } else {
    std::shared_ptr<const LanguageModel> base =
        LoadLanguageModel(c.RequireString("base_lm"));
    CheckVocab(*base, vocab);
    Ralm ralm(base, residual);
    curve = TrainRalm(ralm, data.items, train);
    SaveLanguageModel(ralm, seed, out_path);
  }
  WriteCurve(c, curve);
  err << "final training loss " << FormatReal(curve.back()) << '\n';
  return kExitOk;
}

int RunGenNegatives(const Config& c, std::ostream&, std::ostream& err) {
  const Vocabulary vocab = Vocabulary::Load(c.RequireString("vocab"));
  const auto lm = LoadLanguageModel(c.RequireString("lm"));
  CheckVocab(*lm, vocab);
  const PrefixDataset data = LoadData(c, vocab, err);
  const NegativeSet negs = PregenerateNegatives(
      *lm, data, c.GetUint("num_negatives", 16, 1), TopK(c, vocab.size()),
      c.GetUint("seed", 1));
  SaveNegatives(negs, c.RequireString("negatives_out"));
  return kExitOk;
}

int RunTrainEbm(const Config& c, std::ostream&, std::ostream& err) {
  const Vocabulary vocab = Vocabulary::Load(c.RequireString("vocab"));
  const PrefixDataset data = LoadData(c, vocab, err);
  const NegativeSet negs = LoadNegatives(c.RequireString("negatives"));
  const std::uint64_t seed = c.GetUint("seed", 1);
  const std::size_t V = vocab.size();
  if (negs.vocab_size != V) {
    throw std::runtime_error("negative set vocabulary differs from vocab file");
  }
  const std::string kind = c.GetString("energy_kind", "pooled");
  std::unique_ptr<EnergyModel> energy;
  if (kind == "pooled") {
    Direction direction;
    try {
      direction = ParseDirection(c.GetString("direction", "bidirectional"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("direction", e.what());
    }
    const PooledScorerShape shape{V, c.GetUint("ebm_embed_dim", 8, 1),
                                  c.GetUint("ebm_window", 1),
                                  c.GetUint("ebm_hidden_dim", 16, 1), direction};
    energy = std::make_unique<PooledScorer>(shape, StreamSeed(seed, 1));
  } else if (kind == "tabular") {
    std::vector<Tokens> prefixes;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto pf = data.prefix(i);
      prefixes.emplace_back(pf.begin(), pf.end());
    }
    energy = std::make_unique<TabularEnergy>(
        V, data.prefix_len, data.seq_len, prefixes,
        c.GetUint("tabular_cap", TabularEnergy::kDefaultCap, 1));
  } else {
    throw ConfigError("energy_kind",
                      "expected pooled or tabular, got '" + kind + "'");
  }
  const NceConfig nce{c.GetPositive("nce_lr", 0.5),
                      c.GetUint("nce_steps", 4000, 1),
                      c.GetUint("nce_batch", 64, 1),
                      c.GetUint("negatives_per_positive", 1, 1),
                      c.GetPositive("clip_norm", 10.0), StreamSeed(seed, 2)};
  const std::string out_path = c.RequireString("energy_out");
  std::vector<double> curve;
  try {
    curve = TrainEnergyNce(*energy, data, negs, nce);
  } catch (const NonFiniteLossError& e) {
    SaveEnergyModel(*energy, seed, out_path + ".last_good");
    err << "error: " << e.what() << "; last good parameters written to "
        << out_path << ".last_good\n";
    return kExitFailure;
  }
  SaveEnergyModel(*energy, seed, out_path);
  WriteCurve(c, curve);
  err << "final NCE loss " << FormatReal(curve.back()) << '\n';
  return kExitOk;
}

struct Models {
  Vocabulary vocab;
  std::shared_ptr<LanguageModel> lm;
  std::unique_ptr<EnergyModel> energy;
};

Models LoadModels(const Config& c, bool energy_required = true) {
  Models m{Vocabulary::Load(c.RequireString("vocab")),
           LoadLanguageModel(c.RequireString("lm")), nullptr};
  CheckVocab(*m.lm, m.vocab);
  if (energy_required || c.Has("energy")) {
    m.energy = LoadEnergyModel(c.RequireString("energy"));
  }
  return m;
}

int RunEvalPpl(const Config& c, std::ostream& out, std::ostream& err) {
  const Models m = LoadModels(c);
  const PrefixDataset data = LoadData(c, m.vocab, err);
  const std::uint64_t seed = c.GetUint("seed", 1);
  const std::size_t n = c.GetUint("num_samples", 10000, 2);
  const PplBounds joint = EstimatePplBounds(*m.lm, *m.energy, data, n, seed);
  const double base = ExactLmPpl(*m.lm, data);
  std::ostringstream s;
  s << "metric,lower,upper,n,seed\n";
  s << "joint_ppl," << FormatReal(joint.lower_ppl) << ','
    << FormatReal(joint.upper_ppl) << ',' << n << ',' << seed << '\n';
  s << "base_ppl," << FormatReal(base) << ',' << FormatReal(base) << ",0,"
    << seed << '\n';
  WriteText(c, "report_out", s.str(), out);
  return kExitOk;
}

int RunEvalSteps(const Config& c, std::ostream& out, std::ostream& err) {
  const Models m = LoadModels(c);
  const PrefixDataset data = LoadData(c, m.vocab, err);
  const std::uint64_t seed = c.GetUint("seed", 1);
  const std::size_t n = c.GetUint("num_samples", 10000, 2);
  const std::size_t item = c.GetUint("item", 0);
  if (item >= data.size()) {
    throw ConfigError("item", "index " + std::to_string(item) +
                                  " outside dataset of " +
                                  std::to_string(data.size()) + " items");
  }
  const std::size_t cap = c.GetUint("enum_cap", kDefaultEnumerationCap, 1);
  const std::size_t p = data.prefix_len;
  const std::size_t T = data.seq_len;
  const auto x = data.items.row(item);
  std::ostringstream s;
  s << "t,token,lower,upper,exact\n";
  for (std::size_t pos = p; pos < T; ++pos) {
    const auto hist = x.first(pos);
    const StepProbBounds b = StepConditionalBounds(
        *m.lm, *m.energy, hist, x[pos], p, T, n, StreamSeed(seed, pos));
    s << b.t << ',' << b.token << ',' << FormatReal(b.lower) << ','
      << FormatReal(b.upper) << ',';
    double states = 1.0;
    for (std::size_t i = pos; i < T; ++i) states *= static_cast<double>(m.vocab.size());
    if (states <= static_cast<double>(cap)) {
      s << FormatReal(ExactStepLogProb(*m.lm, *m.energy, hist, x[pos], p, T, cap));
    }
    s << '\n';
    if (b.exceeds_zero) {
      err << "warning: estimated log-probability above 0 at t=" << b.t << '\n';
    }
  }
  WriteText(c, "report_out", s.str(), out);
  return kExitOk;
}

int RunSample(const Config& c, std::ostream& out, std::ostream&) {
  const Models m = LoadModels(c);
  const TokenMode mode = Mode(c);
  const Tokens prefix = m.vocab.Encode(c.RequireString("prefix"), mode);
  const std::size_t T = c.GetUint("seq_len", 16, 1);
  if (prefix.size() >= T) {
    throw ConfigError("prefix", "has " + std::to_string(prefix.size()) +
                                    " tokens, needs fewer than seq_len");
  }
  const std::size_t n = c.GetUint("proposals", 64, 1);
  const std::size_t outputs = c.GetUint("num_outputs", 1, 1);
  const std::uint64_t seed = c.GetUint("seed", 1);
  kernels::SamplerPool pool(*m.lm, TopK(c, m.vocab.size()));
  std::ostringstream text;
  std::ostringstream diag;
  diag << "proposal_index,log_p_lm,energy,weight\n";
  for (std::size_t o = 0; o < outputs; ++o) {
    const ProposalSet ps =
        TopKJointSample(pool, *m.energy, prefix, T, n, StreamSeed(seed, o));
    text << m.vocab.Decode(ps.proposals.row(ps.chosen), mode) << '\n';
    if (o == 0) {
      for (std::size_t i = 0; i < n; ++i) {
        diag << i << ',' << FormatReal(ps.log_p_lm[i]) << ','
             << FormatReal(ps.energies[i]) << ',' << FormatReal(ps.weights[i])
             << '\n';
      }
    }
  }
  WriteText(c, "out", text.str(), out);
  if (c.Has("diagnostics_out")) {
    std::ofstream f(c.RequireString("diagnostics_out"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot write diagnostics file");
    f << diag.str();
  }
  return kExitOk;
}

std::vector<NamedSet> LoadInputs(const Config& c, const Vocabulary& vocab,
                                 std::ostream& err) {
  std::vector<NamedSet> sets;
  std::stringstream ss(c.RequireString("inputs"));
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == part.size()) {
      throw ConfigError("inputs", "expected name=path, got '" + part + "'");
    }
    Config one = c;
    one.Set("corpus", part.substr(eq + 1));
    sets.push_back({part.substr(0, eq), LoadData(one, vocab, err).items});
  }
  return sets;
}

int RunAnalyze(const Config& c, std::ostream& out, std::ostream& err) {
  const std::string report = c.RequireString("report");
  const std::uint64_t seed = c.GetUint("seed", 1);
  std::ostringstream s;
  if (report == "ngrams") {
    const Vocabulary vocab = Vocabulary::Load(c.RequireString("vocab"));
    const std::vector<NamedSet> sets = LoadInputs(c, vocab, err);
    const std::size_t p = PrefixLen(c);
    std::vector<std::size_t> sizes;
    for (std::size_t n = 1; n <= std::min<std::size_t>(4, SeqLen(c) - p); ++n) {
      sizes.push_back(n);
    }
    sizes = c.GetUintList("ngram_sizes", sizes);
    s << "set,n,unique_pct\n";
    for (const NamedSet& set : sets) {
      std::vector<Tokens> completions;
      for (std::size_t i = 0; i < set.sequences.size(); ++i) {
        const auto r = set.sequences.row(i);
        completions.emplace_back(r.begin() + p, r.end());
      }
      for (std::size_t n : sizes) {
        s << set.name << ',' << n << ','
          << FormatReal(UniqueNgramPct(completions, n)) << '\n';
      }
    }
  } else if (report == "density") {
    const Models m = LoadModels(c, false);
    const std::vector<NamedSet> sets = LoadInputs(c, m.vocab, err);
    const std::size_t p = PrefixLen(c);
    const std::size_t T = SeqLen(c);
    const SequenceScorer scorer =
        m.energy ? JointPointScorer(*m.lm, *m.energy, p, T,
                                    c.GetUint("num_samples", 10000, 2), seed)
                 : LmScorer(*m.lm, p);
    s << ScoreDensityReport(scorer, sets, c.GetUint("bins", 20, 1)).ToCsv();
  } else if (report == "sweep") {
    const Models m = LoadModels(c);
    const PrefixDataset data = LoadData(c, m.vocab, err);
    s << SweepCsv(EstimatorSweep(*m.lm, *m.energy, data,
                                 c.GetUintList("sweep_n", {8, 64, 512}),
                                 c.GetUint("trials", 10, 1), seed));
  } else {
    throw ConfigError("report", "expected ngrams, density or sweep, got '" +
                                    report + "'");
  }
  WriteText(c, "report_out", s.str(), out);
  return kExitOk;
}

int RunOracleCheck(const Config& c, std::ostream& out, std::ostream&) {
  Validator validator(ValidationSettings::FromConfig(c));
  bool all = true;
  for (const CheckResult& r : validator.OracleSuite()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    all = all && r.passed;
  }
  return all ? kExitOk : kExitFailure;
}

using Runner = int (*)(const Config&, std::ostream&, std::ostream&);

Runner RunnerFor(const std::string& name) {
  static const std::map<std::string, Runner> runners = {
      {"build-vocab", RunBuildVocab}, {"train-lm", RunTrainLm},
      {"gen-negatives", RunGenNegatives}, {"train-ebm", RunTrainEbm},
      {"eval-ppl", RunEvalPpl},       {"eval-steps", RunEvalSteps},
      {"sample", RunSample},          {"analyze", RunAnalyze},
      {"oracle-check", RunOracleCheck}};
  return runners.at(name);
}

const char* Description(const std::string& name) {
  static const std::map<std::string, const char*> text = {
      {"build-vocab", "build a frequency-ordered vocabulary"},
      {"train-lm", "train an n-gram, neural or residual base LM"},
      {"gen-negatives", "sample negative completions from the base LM"},
      {"train-ebm", "train a residual energy by conditional NCE"},
      {"eval-ppl", "joint-model perplexity bounds and base perplexity"},
      {"eval-steps", "per-step conditional bounds for one item"},
      {"sample", "Top-k Joint Sampling"},
      {"analyze", "n-gram, score-density and estimator-sweep reports"},
      {"oracle-check", "enumeration-oracle validation on the toy task"}};
  return text.at(name);
}

}  // namespace

std::vector<std::string> KnownKeys() {
  std::vector<std::string> out;
  for (const KeyInfo& k : kKeys) out.emplace_back(k.name);
  return out;
}

int Dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Residual energy-based sequence models", "resebm"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> opts;
  for (const auto& [name, keys] : SubcommandKeys()) {
    CLI::App* sub = app.add_subcommand(name, Description(name));
    std::vector<std::string> all = {"seed", "config", "threads"};
    all.insert(all.end(), keys.begin(), keys.end());
    for (const std::string& key : all) {
      CLI::Option* o = sub->add_option(Dashed(key), values[name][key], HelpFor(key));
      opts[name].emplace_back(key, o);
    }
  }
  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  const ThreadGuard guard;
  try {
    Config cfg;
    const auto& given = values[name];
    for (const auto& [key, o] : opts[name]) {
      if (key == "config" && o->count() > 0) cfg = Config::Load(given.at(key));
    }
    const std::vector<std::string> known = KnownKeys();
    for (const auto& [key, value] : cfg.values()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw ConfigError(key, "unknown key");
      }
    }
    for (const auto& [key, o] : opts[name]) {
      if (key != "config" && o->count() > 0) cfg.Set(key, given.at(key));
    }
    cfg.GetUint("seed", 1);  // validated up front for every subcommand
    const std::size_t threads = cfg.GetUint("threads", 0);
    if (threads > 0) kernels::SetThreads(static_cast<int>(threads));
    return RunnerFor(name)(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace resebm::cli
