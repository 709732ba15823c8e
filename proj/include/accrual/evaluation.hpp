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

#ifndef ACCRUAL_EVALUATION_HPP
#define ACCRUAL_EVALUATION_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "accrual/forecast.hpp"
#include "accrual/model.hpp"
#include "accrual/vb.hpp"

namespace accrual {

// Minimum-cost assignment on a square cost matrix; result[row] = column.
std::vector<int> hungarian(const MatrixX& cost);

// Argmax per row, ties to the lowest index.
std::vector<int> argmax_labels(const RowMatrixX& probs);

// perm[estimated cluster] = matched true cluster, maximizing agreement.
std::vector<int> match_clusters(const std::vector<int>& true_labels, const RowMatrixX& probs);
double cluster_recovery(const std::vector<int>& true_labels, const RowMatrixX& probs);

// Mann-Whitney AUROC with midranks; nullopt unless both classes occur.
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<int>& labels);

enum class Protocol { UniformAge, LastYears };

struct EvalOptions {
  Protocol protocol{Protocol::UniformAge};
  double age_lo{50.0};
  double age_hi{90.0};
  double horizon{10.0};
  std::uint64_t seed{1};
  double threshold{0.5};
  // LastYears: count Unreliable entries whose baseline falls inside the
  // held-out window as positives (no onset error contribution).
  bool include_window_censored{false};
  int threads{0};
};

struct ConditionMetrics {
  std::size_t positives{0};
  std::size_t negatives{0};
  std::optional<double> auroc;
  std::optional<double> mae;
  double mean_score{0};
};

struct EvalReport {
  Protocol protocol{Protocol::UniformAge};
  std::size_t individuals_scored{0};
  std::size_t individuals_skipped{0};
  std::size_t items{0};
  std::size_t positives{0};
  std::size_t window_censored{0};
  double accuracy{0};
  std::optional<double> auroc;
  std::optional<double> mae;
  std::size_t mae_count{0};
  std::vector<ConditionMetrics> per_condition;
};

EvalReport evaluate(const Forecaster& f, const Dataset& test, const EvalOptions& opt);

struct PresenceMetrics {
  double accuracy{0};
  std::optional<double> auroc;
};
PresenceMetrics presence_metrics(const Forecaster& f, const Dataset& test, std::uint64_t seed,
                                 double age_lo = 50.0, double age_hi = 90.0);
std::optional<double> onset_mae(const Forecaster& f, const Dataset& test, const EvalOptions& opt);

struct HoldoutResult {
  std::optional<double> auroc;
  std::optional<double> mae;
};
HoldoutResult holdout_protocol(const Forecaster& f, const Dataset& test, double horizon = 10.0,
                               bool include_window_censored = false);

// Recovery on individuals not seen by the fit, through the predictive
// cluster posterior of each complete recorded trajectory.
double heldout_recovery(const Forecaster& f, const Dataset& test, const std::vector<int>& true_labels,
                        int threads = 0);

struct SweepRow {
  std::size_t K{0};
  std::optional<double> auroc;
  int iterations{0};
  bool converged{false};
};

std::vector<SweepRow> k_sweep(const Dataset& train, const Dataset& test, const PriorSpec& prior,
                              const std::vector<std::size_t>& k_grid, double epsilon, int max_iter,
                              std::uint64_t seed, int threads = 0, double horizon = 10.0);

const char* protocol_name(Protocol p);
std::optional<Protocol> parse_protocol(const std::string& name);

}  // namespace accrual

#endif  // ACCRUAL_EVALUATION_HPP
