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

#ifndef ACCRUAL_MODEL_HPP
#define ACCRUAL_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "accrual/expfam.hpp"

namespace accrual {

using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;
using RowMatrixX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using NIG = NIGParams<double>;

inline constexpr double kNoAge = std::numeric_limits<double>::quiet_NaN();

enum class CensorMark : std::uint8_t { Observed, Unreliable, Incomplete };
enum class Presence : std::uint8_t { Absent, Present, Unknown };
enum class Vital : std::uint8_t { Alive, Dead };
enum class Sex : std::uint8_t { Unknown, Male, Female };
enum class SexSpecific : std::uint8_t { None, MaleOnly };

struct ConditionMeta {
  std::string code;
  std::string name;
  SexSpecific sex_specific{SexSpecific::None};
  bool lifelong{false};
};

// Ages in fractional years; t[m] is NaN when there is no onset age.
struct Trajectory {
  std::string id;
  Sex sex{Sex::Unknown};
  std::vector<Presence> d;
  std::vector<double> t;
  std::vector<CensorMark> kappa;
  double rho{0};
  double tau{0};
  Vital iota{Vital::Alive};
};

struct Dataset {
  std::vector<ConditionMeta> conditions;
  std::vector<Trajectory> individuals;

  std::size_t M() const { return conditions.size(); }
  std::size_t N() const { return individuals.size(); }
};

struct Violation {
  std::string individual;
  std::string condition;
  std::string rule;
};

// True when condition c cannot occur for this sex, or is lifelong and
// therefore fully observed for anyone older than zero.
bool known_absent_exempt(const ConditionMeta& c, Sex sex, double tau);
bool sex_excluded(const ConditionMeta& c, Sex sex);

std::vector<Violation> validate_dataset(const Dataset& ds);

struct Hyperparameters {
  VectorX theta;  // K
  MatrixX a;      // M x K
  MatrixX b;      // M x K
  MatrixX u, v, alpha, beta;  // M x K each

  std::size_t K() const { return static_cast<std::size_t>(theta.size()); }
  std::size_t M() const { return static_cast<std::size_t>(a.rows()); }
  NIG nig(Eigen::Index m, Eigen::Index k) const {
    return {u(m, k), v(m, k), alpha(m, k), beta(m, k)};
  }
  bool valid() const;

  static Hyperparameters uniform(std::size_t M, std::size_t K, double theta, double a, double b,
                                 const NIG& nig);
};

// Shared scalar priors expanded to M x K hyperparameters.
struct PriorSpec {
  double theta{1.0};
  double a{1.0};
  double b{1.0};
  NIG nig{50.0, 0.3, 5.0, 750.0};

  Hyperparameters build(std::size_t M, std::size_t K) const {
    return Hyperparameters::uniform(M, K, theta, a, b, nig);
  }
};

enum class PiUpdate { Exact, Literal };

// Flattened active censor entries: Observed-present, Unreliable and
// Incomplete. Observed-absent entries reach the model only through zeta.
struct EntryKind {
  static constexpr std::uint8_t Observed = 0;
  static constexpr std::uint8_t Unreliable = 1;
  static constexpr std::uint8_t Incomplete = 2;
};

struct ActiveEntries {
  std::vector<std::size_t> offset;  // N + 1
  std::vector<std::uint16_t> m;
  std::vector<std::uint8_t> kind;
  std::vector<double> t;  // recorded t, rho or tau
  std::vector<std::uint32_t> local;  // index into latent arrays, or npos
  std::size_t n_latent{0};
  static constexpr std::uint32_t npos = 0xffffffffu;

  static ActiveEntries build(const Dataset& ds);
};

struct VariationalState {
  VectorX theta_star;
  MatrixX a_star, b_star;
  MatrixX u_star, v_star, alpha_star, beta_star;
  RowMatrixX resp;  // N x K
  // Aligned with ActiveEntries::local; pi is only meaningful for Incomplete.
  std::vector<double> pi_local;
  std::vector<GaussianNatural<double>> eta_local;

  std::size_t K() const { return static_cast<std::size_t>(theta_star.size()); }
  NIG nig(Eigen::Index m, Eigen::Index k) const {
    return {u_star(m, k), v_star(m, k), alpha_star(m, k), beta_star(m, k)};
  }
};

struct FitMeta {
  int iterations{0};
  double final_delta{0};
  double epsilon{0};
  bool converged{false};
  std::uint64_t seed{0};
  PiUpdate pi_update{PiUpdate::Exact};
  Hyperparameters hyper;
};

struct FittedModel {
  std::size_t K{0};
  VectorX theta_bar;
  MatrixX pi_bar;
  MatrixX u, v, alpha, beta;
  std::vector<ConditionMeta> conditions;
  FitMeta fit_meta;

  std::size_t M() const { return conditions.size(); }
  NIG nig(Eigen::Index m, Eigen::Index k) const {
    return {u(m, k), v(m, k), alpha(m, k), beta(m, k)};
  }

  static FittedModel from_state(const VariationalState& s, std::vector<ConditionMeta> conditions,
                                FitMeta meta);
};

}  // namespace accrual

#endif  // ACCRUAL_MODEL_HPP
