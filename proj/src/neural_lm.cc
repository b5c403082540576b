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

#include "resebm/neural_lm.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "resebm/numeric.h"
#include "resebm/random.h"

namespace resebm {

NeuralLM::Layout NeuralLM::MakeLayout(const NeuralLmShape& s) {
  Layout l{};
  const std::size_t in = s.context_window * s.embed_dim;
  l.embed = 0;
  l.hidden_w = l.embed + s.vocab_size * s.embed_dim;
  l.hidden_b = l.hidden_w + s.hidden_dim * in;
  l.out_w = l.hidden_b + s.hidden_dim;
  l.out_b = l.out_w + s.vocab_size * s.hidden_dim;
  l.total = l.out_b + s.vocab_size;
  return l;
}

NeuralLM::NeuralLM(const NeuralLmShape& shape, std::uint64_t seed,
                   double init_scale)
    : shape_(shape), layout_(MakeLayout(shape)), params_(layout_.total, 0.0) {
  if (shape.vocab_size < 2 || shape.embed_dim == 0 ||
      shape.context_window == 0 || shape.hidden_dim == 0) {
    throw std::invalid_argument("NeuralLM: all dimensions must be positive");
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, init_scale);
  for (std::size_t i = layout_.embed; i < layout_.hidden_b; ++i) {
    params_[i] = normal(gen);
  }
}

std::vector<NeuralLM::Block> NeuralLM::blocks() const {
  return {{"embed", layout_.embed, layout_.hidden_w - layout_.embed},
          {"hidden_w", layout_.hidden_w, layout_.hidden_b - layout_.hidden_w},
          {"hidden_b", layout_.hidden_b, layout_.out_w - layout_.hidden_b},
          {"out_w", layout_.out_w, layout_.out_b - layout_.out_w},
          {"out_b", layout_.out_b, layout_.total - layout_.out_b}};
}

void NeuralLM::Forward(std::span<const TokenId> history,
                       std::span<double> input, std::span<double> hidden,
                       std::span<double> logits) const {
  const std::size_t d = shape_.embed_dim;
  const std::size_t c = shape_.context_window;
  const std::size_t H = shape_.hidden_dim;
  const std::size_t V = shape_.vocab_size;
  const std::size_t in = c * d;
  std::fill(input.begin(), input.end(), 0.0);
  for (std::size_t j = 0; j < c; ++j) {
    // slot j holds position history.size() - c + j
    if (history.size() + j < c) continue;
    const TokenId id = history[history.size() - c + j];
    const double* e = &params_[layout_.embed + id * d];
    std::copy(e, e + d, input.begin() + j * d);
  }
  for (std::size_t h = 0; h < H; ++h) {
    const double* w = &params_[layout_.hidden_w + h * in];
    double a = params_[layout_.hidden_b + h];
    for (std::size_t i = 0; i < in; ++i) a += w[i] * input[i];
    hidden[h] = std::tanh(a);
  }
  for (std::size_t v = 0; v < V; ++v) {
    const double* u = &params_[layout_.out_w + v * H];
    double z = params_[layout_.out_b + v];
    for (std::size_t h = 0; h < H; ++h) z += u[h] * hidden[h];
    logits[v] = z;
  }
}

void NeuralLM::NextLogProbsInto(std::span<const TokenId> history,
                                std::span<double> out) const {
  std::vector<double> input(shape_.context_window * shape_.embed_dim);
  std::vector<double> hidden(shape_.hidden_dim);
  Forward(history, input, hidden, out);
  LogSoftmaxInPlace(out);
}

double NeuralLM::LossAndGrad(std::span<const TokenId> seq, std::size_t pos,
                             const LanguageModel* base, double scale,
                             std::span<double> grad) const {
  const std::size_t d = shape_.embed_dim;
  const std::size_t c = shape_.context_window;
  const std::size_t H = shape_.hidden_dim;
  const std::size_t V = shape_.vocab_size;
  const std::size_t in = c * d;
  const auto history = seq.first(pos);
  const TokenId target = seq[pos];

  std::vector<double> input(in), hidden(H), logits(V);
  Forward(history, input, hidden, logits);
  if (base != nullptr) {
    std::vector<double> base_lp(V);
    base->NextLogProbsInto(history, base_lp);
    for (std::size_t v = 0; v < V; ++v) logits[v] += base_lp[v];
  }
  LogSoftmaxInPlace(logits);
  const double loss = -logits[target];

  // dloss/dlogits = softmax - onehot
  std::vector<double> dz(V);
  for (std::size_t v = 0; v < V; ++v) dz[v] = std::exp(logits[v]);
  dz[target] -= 1.0;

  std::vector<double> dh(H, 0.0);
  for (std::size_t v = 0; v < V; ++v) {
    const double g = scale * dz[v];
    grad[layout_.out_b + v] += g;
    double* gu = &grad[layout_.out_w + v * H];
    const double* u = &params_[layout_.out_w + v * H];
    for (std::size_t h = 0; h < H; ++h) {
      gu[h] += g * hidden[h];
      dh[h] += dz[v] * u[h];
    }
  }
  std::vector<double> dinput(in, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    const double da = dh[h] * (1.0 - hidden[h] * hidden[h]);
    grad[layout_.hidden_b + h] += scale * da;
    double* gw = &grad[layout_.hidden_w + h * in];
    const double* w = &params_[layout_.hidden_w + h * in];
    for (std::size_t i = 0; i < in; ++i) {
      gw[i] += scale * da * input[i];
      dinput[i] += da * w[i];
    }
  }
  for (std::size_t j = 0; j < c; ++j) {
    if (history.size() + j < c) continue;
    const TokenId id = history[history.size() - c + j];
    double* ge = &grad[layout_.embed + id * d];
    for (std::size_t k = 0; k < d; ++k) ge[k] += scale * dinput[j * d + k];
  }
  return loss;
}

namespace {

constexpr std::size_t kChunk = 8;

}  // namespace

std::vector<double> TrainNeuralLm(NeuralLM& model, const SequenceBatch& data,
                                  const LmTrainConfig& cfg,
                                  const LanguageModel* frozen_base) {
  if (data.empty()) throw std::invalid_argument("empty training data");
  if (cfg.batch == 0) throw std::invalid_argument("batch must be positive");
  if (frozen_base != nullptr &&
      frozen_base->vocab_size() != model.vocab_size()) {
    throw std::invalid_argument("base and residual vocabularies differ");
  }
  CheckIds(data.flat(), model.vocab_size());
  const std::size_t T = data.length();
  const std::size_t num_examples = data.size() * T;
  const std::size_t P = model.num_params();
  const std::size_t num_chunks = (cfg.batch + kChunk - 1) / kChunk;

  std::vector<double> curve;
  curve.reserve(cfg.steps);
  std::vector<double> chunk_grads(num_chunks * P);
  std::vector<double> losses(cfg.batch);
  std::vector<std::size_t> picks(cfg.batch);
  std::vector<double> grad(P);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    SplitMix64 rng(StreamSeed(cfg.seed, step));
    for (auto& pick : picks) {
      pick = static_cast<std::size_t>(rng.Uniform() * num_examples);
    }
    std::fill(chunk_grads.begin(), chunk_grads.end(), 0.0);
    const double scale = 1.0 / static_cast<double>(cfg.batch);
#pragma omp parallel for schedule(static)
    for (std::size_t ch = 0; ch < num_chunks; ++ch) {
      std::span<double> g(chunk_grads.data() + ch * P, P);
      const std::size_t end = std::min(cfg.batch, (ch + 1) * kChunk);
      for (std::size_t b = ch * kChunk; b < end; ++b) {
        const std::size_t item = picks[b] / T;
        const std::size_t pos = picks[b] % T;
        losses[b] = model.LossAndGrad(data.row(item), pos, frozen_base, scale, g);
      }
    }
    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= static_cast<double>(cfg.batch);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite language-model loss at step " << step
          << " (lr=" << cfg.lr << ", parameter norm " << L2Norm(model.params())
          << ")";
      throw std::runtime_error(msg.str());
    }
    curve.push_back(loss);
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t ch = 0; ch < num_chunks; ++ch) {
      const double* g = chunk_grads.data() + ch * P;
      for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
    }
    SgdStep(model.params(), grad, cfg.lr, cfg.clip_norm);
  }
  return curve;
}

double MeanCrossEntropy(const LanguageModel& lm, const SequenceBatch& data) {
  if (data.empty()) throw std::invalid_argument("empty data");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total -= SequenceLogProb(lm, data.row(i), 0);
  }
  return total / static_cast<double>(data.size() * data.length());
}

}  // namespace resebm
