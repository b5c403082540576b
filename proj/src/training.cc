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

#include "resebm/training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "resebm/checkpoint.h"
#include "resebm/numeric.h"
#include "resebm/random.h"

namespace resebm {

namespace {

// Chunk boundaries depend only on the batch size, so the reduction order
// is the same for every thread count.
std::size_t ChunkSize(std::size_t batch) {
  return std::max<std::size_t>(8, (batch + 31) / 32);
}

void CheckEnergies(std::span<const double> e, const char* what) {
  if (e.empty()) {
    throw std::invalid_argument(std::string("empty ") + what + " energy list");
  }
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!std::isfinite(e[i])) {
      throw std::invalid_argument(std::string("non-finite ") + what +
                                  " energy at index " + std::to_string(i));
    }
  }
}

}  // namespace

NegativeSet PregenerateNegatives(const LanguageModel& lm,
                                 const PrefixDataset& data, std::size_t m,
                                 std::size_t k, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("m must be at least 1");
  if (k == 0 || k > lm.vocab_size()) {
    throw std::invalid_argument("k must lie in [1, |V|]");
  }
  if (data.items.empty()) throw std::invalid_argument("empty dataset");
  CheckIds(data.items.flat(), lm.vocab_size());
  NegativeSet out;
  out.vocab_size = lm.vocab_size();
  out.prefix_len = data.prefix_len;
  out.seq_len = data.seq_len;
  out.m = m;
  out.k = k;
  out.seed = seed;
  out.items = data.items.size();
  const std::size_t L = out.completion_len();
  const std::size_t p = data.prefix_len;
  out.ids.resize(out.items * m * L);
  const std::size_t total = out.items * m;
#pragma omp parallel
  {
    TopKSampler sampler(lm, k);
    Tokens seq(data.seq_len);
#pragma omp for schedule(static)
    for (std::size_t idx = 0; idx < total; ++idx) {
      const std::size_t i = idx / m;
      const std::size_t j = idx % m;
      const auto prefix = data.prefix(i);
      std::copy(prefix.begin(), prefix.end(), seq.begin());
      SplitMix64 rng(StreamSeed(StreamSeed(seed, i), j));
      sampler.Complete(seq, p, rng);
      std::copy(seq.begin() + p, seq.end(), out.ids.begin() + idx * L);
    }
  }
  return out;
}

void SaveNegatives(const NegativeSet& negs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  WriteHeader(out, {{"model_kind", "negatives"},
                    {"vocab_size", std::to_string(negs.vocab_size)},
                    {"prefix_len", std::to_string(negs.prefix_len)},
                    {"seq_len", std::to_string(negs.seq_len)},
                    {"m", std::to_string(negs.m)},
                    {"k", std::to_string(negs.k)},
                    {"seed", std::to_string(negs.seed)},
                    {"items", std::to_string(negs.items)}});
  const std::size_t block = negs.m * negs.completion_len();
  for (std::size_t i = 0; i < negs.items; ++i) {
    out << i << ' ' << negs.m << '\n';
    WriteLittleEndian(out, std::span<const std::uint32_t>(
                               negs.ids.data() + i * block, block));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

NegativeSet LoadNegatives(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  ModelRecord meta;
  meta.metadata = ReadHeader(in);
  if (meta.Get("model_kind") != "negatives") {
    throw std::runtime_error(path.string() + " is not a negative-set file");
  }
  NegativeSet negs;
  negs.vocab_size = meta.GetUint("vocab_size");
  negs.prefix_len = meta.GetUint("prefix_len");
  negs.seq_len = meta.GetUint("seq_len");
  negs.m = meta.GetUint("m");
  negs.k = meta.GetUint("k");
  negs.seed = meta.GetUint("seed");
  negs.items = meta.GetUint("items");
  if (negs.prefix_len >= negs.seq_len || negs.m == 0) {
    throw std::runtime_error("malformed negative-set header");
  }
  const std::size_t block = negs.m * negs.completion_len();
  negs.ids.resize(negs.items * block);
  for (std::size_t i = 0; i < negs.items; ++i) {
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error("truncated negative-set file");
    }
    std::istringstream rec(line);
    std::size_t index = 0, m = 0;
    if (!(rec >> index >> m) || index != i || m != negs.m) {
      throw std::runtime_error("bad negative-set record for item " +
                               std::to_string(i));
    }
    ReadLittleEndian(in, std::span<std::uint32_t>(negs.ids.data() + i * block,
                                                  block));
  }
  for (TokenId id : negs.ids) {
    if (id >= negs.vocab_size) {
      throw std::runtime_error("negative-set id out of vocabulary range");
    }
  }
  return negs;
}

double NceLoss(std::span<const double> e_pos, std::span<const double> e_neg) {
  CheckEnergies(e_pos, "positive");
  CheckEnergies(e_neg, "negative");
  double a = 0.0;
  for (double e : e_pos) a += Softplus(e);
  double b = 0.0;
  for (double e : e_neg) b += Softplus(-e);
  return a / static_cast<double>(e_pos.size()) +
         b / static_cast<double>(e_neg.size());
}

void NceLossGrad(std::span<const double> e_pos, std::span<const double> e_neg,
                 std::span<double> d_pos, std::span<double> d_neg) {
  CheckEnergies(e_pos, "positive");
  CheckEnergies(e_neg, "negative");
  if (d_pos.size() != e_pos.size() || d_neg.size() != e_neg.size()) {
    throw std::invalid_argument("gradient buffers have the wrong size");
  }
  const double np = static_cast<double>(e_pos.size());
  const double nn = static_cast<double>(e_neg.size());
  for (std::size_t i = 0; i < e_pos.size(); ++i) d_pos[i] = Sigmoid(e_pos[i]) / np;
  for (std::size_t i = 0; i < e_neg.size(); ++i) d_neg[i] = -Sigmoid(-e_neg[i]) / nn;
}

std::vector<double> TrainEnergyNce(EnergyModel& energy,
                                   const PrefixDataset& data,
                                   const NegativeSet& negs,
                                   const NceConfig& cfg) {
  if (data.items.empty()) throw std::invalid_argument("empty dataset");
  if (negs.items != data.items.size() || negs.prefix_len != data.prefix_len ||
      negs.seq_len != data.seq_len) {
    throw std::invalid_argument("negative set was not generated for this data");
  }
  if (cfg.batch == 0 || cfg.steps == 0 || cfg.negatives_per_positive == 0 ||
      !(cfg.lr > 0.0) || !(cfg.clip_norm > 0.0)) {
    throw std::invalid_argument("NCE config fields must be positive");
  }
  if (cfg.negatives_per_positive > negs.m) {
    throw std::invalid_argument("negatives_per_positive exceeds cached m");
  }
  const std::size_t p = data.prefix_len;
  const std::size_t T = data.seq_len;
  const std::size_t B = cfg.batch;
  const std::size_t R = cfg.negatives_per_positive;
  const std::size_t P = energy.num_params();
  const std::size_t chunk = ChunkSize(B);
  const std::size_t num_chunks = (B + chunk - 1) / chunk;
  const double pos_scale = 1.0 / static_cast<double>(B);
  const double neg_scale = 1.0 / static_cast<double>(B * R);

  std::vector<double> curve;
  curve.reserve(cfg.steps);
  std::vector<std::size_t> items(B);
  std::vector<std::size_t> neg_picks(B * R);
  std::vector<double> chunk_grads(num_chunks * P);
  std::vector<double> chunk_loss(num_chunks);
  std::vector<double> grad(P);
  std::vector<double> last_good(energy.params().begin(), energy.params().end());

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    SplitMix64 rng(StreamSeed(cfg.seed, step));
    for (std::size_t b = 0; b < B; ++b) {
      items[b] = static_cast<std::size_t>(rng.Uniform() * data.items.size());
      for (std::size_t r = 0; r < R; ++r) {
        neg_picks[b * R + r] = static_cast<std::size_t>(rng.Uniform() * negs.m);
      }
    }
    std::fill(chunk_grads.begin(), chunk_grads.end(), 0.0);
#pragma omp parallel
    {
      Tokens seq(T);
#pragma omp for schedule(static)
      for (std::size_t ch = 0; ch < num_chunks; ++ch) {
        std::span<double> g(chunk_grads.data() + ch * P, P);
        double loss = 0.0;
        try {
          const std::size_t end = std::min(B, (ch + 1) * chunk);
          for (std::size_t b = ch * chunk; b < end; ++b) {
            const auto x = data.items.row(items[b]);
            const double ep = energy.Energy(x, p);
            loss += Softplus(ep) * pos_scale;
            energy.AccumulateGrad(x, p, Sigmoid(ep) * pos_scale, g);
            std::copy(x.begin(), x.begin() + p, seq.begin());
            for (std::size_t r = 0; r < R; ++r) {
              const auto c = negs.completion(items[b], neg_picks[b * R + r]);
              std::copy(c.begin(), c.end(), seq.begin() + p);
              const double en = energy.Energy(seq, p);
              loss += Softplus(-en) * neg_scale;
              energy.AccumulateGrad(seq, p, -Sigmoid(-en) * neg_scale, g);
            }
          }
        } catch (const std::exception&) {
          loss = std::numeric_limits<double>::quiet_NaN();
        }
        chunk_loss[ch] = loss;
      }
    }
    double loss = 0.0;
    for (double l : chunk_loss) loss += l;
    if (!std::isfinite(loss)) {
      std::copy(last_good.begin(), last_good.end(), energy.params().begin());
      std::ostringstream msg;
      msg << "non-finite NCE loss at step " << step << " (lr=" << cfg.lr
          << ", restored parameters with norm " << L2Norm(energy.params())
          << ")";
      throw NonFiniteLossError(msg.str(), step);
    }
    curve.push_back(loss);
    std::copy(energy.params().begin(), energy.params().end(), last_good.begin());
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t ch = 0; ch < num_chunks; ++ch) {
      const double* g = chunk_grads.data() + ch * P;
      for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
    }
    SgdStep(energy.params(), grad, cfg.lr, cfg.clip_norm);
  }
  return curve;
}

}  // namespace resebm
