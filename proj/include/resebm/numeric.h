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

#ifndef RESEBM_NUMERIC_H_
#define RESEBM_NUMERIC_H_

#include <cmath>
#include <span>
#include <vector>

namespace resebm {

// log(sum(exp(xs))) with max subtraction. Returns -inf for an empty input.
double LogSumExp(std::span<const double> xs);

// Replaces xs by xs - LogSumExp(xs).
void LogSoftmaxInPlace(std::span<double> xs);

// Normalized probabilities exp(xs - LogSumExp(xs)).
std::vector<double> Softmax(std::span<const double> xs);

// log(1 + exp(z)), stable for large |z|.
inline double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double L2Norm(std::span<const double> xs);

// Relative error ||a - b|| / max(||a||, ||b||), 0 when both vanish.
double RelativeError(std::span<const double> a, std::span<const double> b);

bool AllFinite(std::span<const double> xs);

// Rescales `grad` in place so its L2 norm is at most `clip_norm`. Returns
// the pre-clipping norm.
double ClipGradient(std::span<double> grad, double clip_norm);

// params -= lr * clip(grad). Returns the pre-clipping gradient norm.
double SgdStep(std::span<double> params, std::span<double> grad, double lr,
               double clip_norm);

}  // namespace resebm

#endif  // RESEBM_NUMERIC_H_
