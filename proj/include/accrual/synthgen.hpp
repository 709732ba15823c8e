// Copyright 2026 The accrual Authors
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

#ifndef ACCRUAL_SYNTHGEN_HPP
#define ACCRUAL_SYNTHGEN_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "accrual/model.hpp"

namespace accrual {

struct SimConfig {
  std::size_t N{200000};
  std::size_t M{80};
  std::size_t K{10};
  double weight_lo{0.03};
  double weight_hi{0.15};
  double prevalence_a{0.07};
  double prevalence_b{0.49};
  NIG onset{50.0, 0.3, 5.0, 300.0};
  double baseline_lo{20.0};
  double baseline_hi{60.0};
  double followup_years{30.0};
  double death_prob{0.8};
  double train_fraction{0.8};
  std::uint64_t seed{1};
  std::size_t max_weight_draws{100000000};

  // Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

struct TrueParams {
  VectorX weights;  // K
  MatrixX pi;       // M x K
  MatrixX mu;       // M x K
  MatrixX sigma2;   // M x K
};

struct SimResult {
  Dataset train;
  Dataset test;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
  TrueParams truth;
  double mean_conditions{0};           // latent presences per trajectory
  double mean_recorded_conditions{0};  // Observed-present plus Unreliable
};

SimResult generate(const SimConfig& cfg, int threads = 0);

// Beta draw through log-gamma variates; safe for shapes well below 1.
double sample_beta(std::mt19937_64& rng, double a, double b);

// Dirichlet(1) draws rejected until every weight lies in [lo, hi].
VectorX sample_bounded_weights(std::mt19937_64& rng, std::size_t K, double lo, double hi,
                               std::size_t max_draws);

std::vector<ConditionMeta> synthetic_conditions(std::size_t M);

}  // namespace accrual

#endif  // ACCRUAL_SYNTHGEN_HPP
