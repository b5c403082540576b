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

#include "resebm/analysis.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "resebm/estimation.h"
#include "resebm/random.h"

namespace resebm {

double UniqueNgramPct(const std::vector<Tokens>& samples, std::size_t n) {
  if (n == 0) throw std::invalid_argument("n-gram size must be positive");
  if (samples.empty()) throw std::invalid_argument("no samples");
  std::set<std::vector<TokenId>> seen;
  std::size_t slots = 0;
  for (const Tokens& s : samples) {
    if (s.size() < n) {
      throw std::invalid_argument("n-gram size " + std::to_string(n) +
                                  " exceeds sample length " +
                                  std::to_string(s.size()));
    }
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      seen.emplace(s.begin() + i, s.begin() + i + n);
      ++slots;
    }
  }
  return 100.0 * static_cast<double>(seen.size()) / static_cast<double>(slots);
}

double UniqueNgramPct(const SequenceBatch& samples, std::size_t n) {
  std::vector<Tokens> rows;
  rows.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto r = samples.row(i);
    rows.emplace_back(r.begin(), r.end());
  }
  return UniqueNgramPct(rows, n);
}

SequenceScorer LmScorer(const LanguageModel& lm, std::size_t p) {
  return [&lm, p](std::span<const TokenId> x) {
    return SequenceLogProb(lm, x, p);
  };
}

SequenceScorer JointPointScorer(const LanguageModel& lm,
                                const EnergyModel& energy, std::size_t p,
                                std::size_t T, std::size_t n,
                                std::uint64_t seed) {
  auto cache = std::make_shared<std::map<Tokens, double>>();
  return [&lm, &energy, p, T, n, seed, cache](std::span<const TokenId> x) {
    Tokens prefix(x.begin(), x.begin() + p);
    auto it = cache->find(prefix);
    if (it == cache->end()) {
      const double tn =
          EstimateLogPartition(lm, energy, prefix, p, T, n,
                               StreamSeed(seed, cache->size()))
              .lower;
      it = cache->emplace(std::move(prefix), tn).first;
    }
    return SequenceLogProb(lm, x, p) - energy.Energy(x, p) - it->second;
  };
}

std::string FormatReal(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

DensityReport ScoreDensityReport(const SequenceScorer& scorer,
                                 const std::vector<NamedSet>& sets,
                                 std::size_t bins) {
  if (sets.empty()) throw std::invalid_argument("no sets to report");
  if (bins == 0) throw std::invalid_argument("bins must be positive");
  DensityReport report;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const NamedSet& set : sets) {
    if (set.sequences.empty()) {
      throw std::invalid_argument("set '" + set.name + "' is empty");
    }
    DensitySummary s;
    s.name = set.name;
    double total = 0.0;
    for (std::size_t i = 0; i < set.sequences.size(); ++i) {
      const double v = scorer(set.sequences.row(i));
      if (!std::isfinite(v)) {
        throw std::runtime_error("non-finite score in set '" + set.name + "'");
      }
      s.scores.push_back(v);
      total += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    s.mean = total / static_cast<double>(s.scores.size());
    report.sets.push_back(std::move(s));
  }
  if (hi <= lo) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) {
    report.edges.push_back(b == bins ? hi : lo + width * static_cast<double>(b));
  }
  const double ref = report.sets.front().mean;
  for (DensitySummary& s : report.sets) {
    s.mean_gap = std::abs(s.mean - ref);
    s.counts.assign(bins, 0);
    for (double v : s.scores) {
      auto b = static_cast<std::size_t>((v - lo) / width);
      ++s.counts[std::min(b, bins - 1)];
    }
  }
  return report;
}

std::string DensityReport::ToCsv() const {
  std::ostringstream out;
  out << "set,bin_lo,bin_hi,count,mean,mean_gap\n";
  for (const DensitySummary& s : sets) {
    for (std::size_t b = 0; b < s.counts.size(); ++b) {
      out << s.name << ',' << FormatReal(edges[b]) << ','
          << FormatReal(edges[b + 1]) << ',' << s.counts[b] << ','
          << FormatReal(s.mean) << ',' << FormatReal(s.mean_gap) << '\n';
    }
  }
  return out.str();
}

std::vector<SweepRow> EstimatorSweep(const LanguageModel& lm,
                                     const EnergyModel& energy,
                                     const PrefixDataset& data,
                                     const std::vector<std::size_t>& n_values,
                                     std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("trials must be positive");
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    if (n_values[i] < 2) throw std::invalid_argument("each n must be >= 2");
    if (i > 0 && n_values[i] <= n_values[i - 1]) {
      throw std::invalid_argument("n values must be strictly ascending");
    }
  }
  std::vector<SweepRow> rows;
  for (std::size_t n : n_values) {
    double sum_lo = 0.0, sum_hi = 0.0, sum_w = 0.0, sum_w2 = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      const PplBounds b = EstimatePplBounds(
          lm, energy, data, n, StreamSeed(StreamSeed(seed, n), trial));
      const double w = b.upper_ppl - b.lower_ppl;
      sum_lo += b.lower_ppl;
      sum_hi += b.upper_ppl;
      sum_w += w;
      sum_w2 += w * w;
    }
    const double dt = static_cast<double>(trials);
    SweepRow row{n, sum_lo / dt, sum_hi / dt, 0.0};
    if (trials > 1) {
      const double mean_w = sum_w / dt;
      const double var = std::max(0.0, (sum_w2 - dt * mean_w * mean_w) / (dt - 1));
      row.stderr_width = std::sqrt(var / dt);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string SweepCsv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "n,mean_lower,mean_upper,stderr\n";
  for (const SweepRow& r : rows) {
    out << r.n << ',' << FormatReal(r.mean_lower) << ','
        << FormatReal(r.mean_upper) << ',' << FormatReal(r.stderr_width) << '\n';
  }
  return out.str();
}

}  // namespace resebm
