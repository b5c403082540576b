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

#ifndef RESEBM_VALIDATION_H_
#define RESEBM_VALIDATION_H_

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "resebm/config.h"
#include "resebm/energy.h"
#include "resebm/toy_task.h"

namespace resebm {

struct ValidationSettings {
  ToyConfig toy;
  RepetitionConfig rep;
  std::size_t sandwich_trials = 500;
  std::vector<std::size_t> sandwich_n{8, 64, 512};
  std::vector<std::size_t> bias_n{8, 16, 32, 64, 128};
  std::size_t coverage_trials = 100;
  std::size_t coverage_n = 5000;
  std::size_t sampler_draws = 10000;
  std::size_t sampler_proposals = 10000;
  std::size_t gradient_instances = 50;
  std::size_t normalization_cases = 1000;
  std::size_t ppl_samples = 10000;

  static ValidationSettings FromConfig(const Config& cfg);
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // deterministic for fixed settings
  double seconds = 0.0;  // wall time, kept out of `detail`
};

// Oracle-backed checks on the enumerable toy task. Trained energies are
// built on first use and shared between checks.
class Validator {
 public:
  explicit Validator(ValidationSettings settings);
  ~Validator();

  const ValidationSettings& settings() const { return settings_; }
  const ToyTask& toy();
  const TabularEnergy& tabular();
  const PooledScorer& pooled();

  // Exact joint vs exact data completion distribution per toy prefix.
  CheckResult OptimumRecovery();
  // Trial-mean sandwich of the log Z estimators around the exact value.
  CheckResult LogZSandwich(const std::vector<std::size_t>& n_values);
  // How the bias E[T_n] - log Z is estimated from the trials.
  enum class BiasEstimate {
    kTrialMean,        // mean(T_n) - exact
    kControlVariate,   // mean of (T_n - exact) - (Z_n / Z - 1), same expectation
  };
  // Estimated |bias| strictly decreasing along n_values.
  CheckResult BiasShrinkage(const std::vector<std::size_t>& n_values,
                            BiasEstimate estimate = BiasEstimate::kTrialMean);
  // Bounds at t = T against marginalization of the exact joint.
  CheckResult LastStepExact();
  // Coverage and width of the t = T - 1 interval.
  CheckResult SecondToLastCoverage();
  CheckResult SamplerCorrectness();
  CheckResult GradientIntegrity();
  CheckResult PplDirection();
  CheckResult Normalization();
  CheckResult NgramHandCounts();
  CheckResult RepetitionDiversity();
  // Runs every CLI subcommand three times (threads 1, 1, 4) under
  // `work_dir` and compares all outputs byte for byte.
  CheckResult Reproducibility(const std::filesystem::path& work_dir,
                              const std::filesystem::path& toy_config);

  // The enumeration suite run by `oracle-check`.
  std::vector<CheckResult> OracleSuite();

 private:
  struct LogZTrialStats {
    double mean_lower = 0.0;
    double se_lower = 0.0;
    double mean_upper = 0.0;
    double se_upper = 0.0;
    double mean_cv = 0.0;
    double se_cv = 0.0;
  };
  const LogZTrialStats& LogZTrials(std::size_t n);
  double ExactLogZ();

  ValidationSettings settings_;
  std::unique_ptr<ToyTask> toy_;
  std::unique_ptr<TabularEnergy> tabular_;
  std::unique_ptr<PooledScorer> pooled_;
  std::map<std::size_t, LogZTrialStats> logz_trials_;
};

}  // namespace resebm

#endif  // RESEBM_VALIDATION_H_
