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

#ifndef RESEBM_RANDOM_H_
#define RESEBM_RANDOM_H_

#include <cstdint>
#include <limits>
#include <span>

namespace resebm {

// SplitMix64 bit generator. Seeding is O(1), which matters because every
// Monte Carlo draw gets its own stream so results do not depend on how
// draws are scheduled across threads.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Seed of the independent stream `stream` derived from `seed`.
inline std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 a(seed ^ 0x5851f42d4c957f2dULL);
  const std::uint64_t base = a();
  SplitMix64 b(base + 0x632be59bd9b4e019ULL * (stream + 1));
  return b();
}

// Index of the first cumulative weight exceeding u * cdf.back().
inline std::size_t SampleFromCdf(std::span<const double> cdf, double u) {
  const double target = u * cdf.back();
  std::size_t lo = 0;
  std::size_t hi = cdf.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cdf[mid] > target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace resebm

#endif  // RESEBM_RANDOM_H_
