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

#include "resebm/numeric.h"

#include <algorithm>
#include <limits>

namespace resebm {

double LogSumExp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

void LogSoftmaxInPlace(std::span<double> xs) {
  const double lse = LogSumExp(xs);
  for (double& x : xs) x -= lse;
}

std::vector<double> Softmax(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double s = 0.0;
  for (double& x : out) {
    x = std::exp(x - m);
    s += x;
  }
  for (double& x : out) x /= s;
  return out;
}

double L2Norm(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}

double RelativeError(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    diff += d * d;
  }
  const double scale = std::max(L2Norm(a), L2Norm(b));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff) / scale;
}

bool AllFinite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

double ClipGradient(std::span<double> grad, double clip_norm) {
  const double norm = L2Norm(grad);
  if (norm > clip_norm && norm > 0.0) {
    const double scale = clip_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

double SgdStep(std::span<double> params, std::span<double> grad, double lr,
               double clip_norm) {
  const double norm = ClipGradient(grad, clip_norm);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
  return norm;
}

}  // namespace resebm
