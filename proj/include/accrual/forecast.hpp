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

// Predictive posterior for new, partially observed individuals.

#ifndef ACCRUAL_FORECAST_HPP
#define ACCRUAL_FORECAST_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "accrual/model.hpp"

namespace accrual {

struct PartialTrajectory {
  std::vector<std::pair<std::size_t, double>> observed;  // (condition, onset age)
  std::vector<std::size_t> unreliable;                   // onset before rho_prime
  double rho_prime{0};
  double tau_prime{0};
  Sex sex{Sex::Unknown};
};

struct FieldError {
  std::string field;
  std::string message;
};

enum class ConditionStatus : std::uint8_t { Open, History, KnownAbsent };

struct ConditionRisk {
  std::size_t m{0};
  ConditionStatus status{ConditionStatus::Open};
  double total_future_risk{0};
  double prob_within{0};
  std::optional<double> map_onset;
  std::vector<double> ages;
  std::vector<double> risk;
};

struct RiskProfile {
  VectorX cluster_probs;
  double horizon{0};
  std::vector<ConditionRisk> conditions;
};

struct WindowPrediction {
  double prob_within{0};
  std::optional<double> map_onset;
};

struct FutureEvent {
  std::size_t m;
  bool present;
  std::optional<double> onset;
};

inline constexpr double kMapGridStep = 0.01;
inline constexpr double kCurveMaxAge = 110.0;

// Ascending grid tau', tau' + step, ..., capped and closed at max_age.
std::vector<double> age_grid(double from, double step, double max_age = kCurveMaxAge);

class Forecaster {
 public:
  explicit Forecaster(FittedModel model);

  const FittedModel& model() const { return model_; }
  std::size_t M() const { return model_.M(); }
  std::size_t K() const { return model_.K; }
  const StudentT<double>& predictive(std::size_t m, std::size_t k) const { return t_[m * K() + k]; }
  double pi_bar(std::size_t m, std::size_t k) const {
    return model_.pi_bar(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
  }

  std::vector<FieldError> validate(const PartialTrajectory& p) const;
  std::vector<ConditionStatus> statuses(const PartialTrajectory& p) const;

  VectorX cluster_posterior(const PartialTrajectory& p) const;
  // Posterior over clusters from a complete recorded trajectory.
  VectorX trajectory_posterior(const Trajectory& tr) const;

  double surviving_presence_prob(std::size_t m, std::size_t k, double tau_prime) const;

  // Mixture cumulative risk of onset in (tau', g] for each grid age.
  std::vector<double> risk_curve(const VectorX& phi, std::size_t m, double tau_prime,
                                 const std::vector<double>& grid) const;
  std::vector<double> risk_curve(const PartialTrajectory& p, std::size_t m,
                                 const std::vector<double>& grid) const;
  double total_future_risk(const VectorX& phi, std::size_t m, double tau_prime) const;

  // Probability of onset in (lo, hi] and the conditional mean onset there.
  double window_risk(const VectorX& phi, std::size_t m, double lo, double hi) const;
  std::optional<double> window_mean_onset(const VectorX& phi, std::size_t m, double lo, double hi) const;
  // Mode of the mixture onset density over (lo, hi].
  std::optional<double> window_map_onset(const VectorX& phi, std::size_t m, double lo, double hi) const;

  std::vector<double> per_cluster_population_risk(std::size_t m, std::size_t k,
                                                  const std::vector<double>& grid) const;
  std::vector<double> population_risk(std::size_t m, const std::vector<double>& grid) const;

  std::vector<FutureEvent> sample_future(const PartialTrajectory& p, std::uint64_t seed) const;
  std::vector<WindowPrediction> predict_window(const PartialTrajectory& p, double horizon) const;
  RiskProfile profile(const PartialTrajectory& p, double horizon, double grid_step) const;

  // Predictive mass below age zero, theta-weighted, per condition.
  std::vector<double> below_zero_mass() const;

 private:
  FittedModel model_;
  std::vector<StudentT<double>> t_;
  VectorX log_theta_;
};

VectorX cluster_posterior(const FittedModel& model, const PartialTrajectory& p);
double surviving_presence_prob(const FittedModel& model, std::size_t m, std::size_t k, double tau_prime);
std::vector<double> risk_curve(const FittedModel& model, const PartialTrajectory& p, std::size_t m,
                               const std::vector<double>& grid);
std::vector<double> per_cluster_population_risk(const FittedModel& model, std::size_t m, std::size_t k,
                                                const std::vector<double>& grid);
std::vector<FutureEvent> sample_future(const FittedModel& model, const PartialTrajectory& p,
                                       std::uint64_t seed);
std::vector<WindowPrediction> predict_window(const FittedModel& model, const PartialTrajectory& p,
                                             double horizon);

}  // namespace accrual

#endif  // ACCRUAL_FORECAST_HPP
