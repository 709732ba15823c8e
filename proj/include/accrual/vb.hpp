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

// Coordinate-ascent variational updates for the censored onset mixture.

#ifndef ACCRUAL_VB_HPP
#define ACCRUAL_VB_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "accrual/model.hpp"

namespace accrual {

struct ZetaLambda {
  VectorX zeta;      // K
  RowMatrixX lambda; // M x K
};

// Per-(m,k) expectations under the current NIG factors.
struct ExpectedTerms {
  RowMatrixX e_log_g;
  RowMatrixX e_eta1;
  RowMatrixX e_eta2;
};

struct Intermediates {
  VectorX z_bar;     // K
  MatrixX n_bar;     // M x K
  MatrixX t1_bar;    // M x K
  MatrixX t2_bar;    // M x K
};

struct FitOptions {
  std::size_t K{1};
  double epsilon{0};  // <= 0 selects 1e-4 * sqrt(parameter count)
  int max_iter{500};
  std::uint64_t seed{1};
  PiUpdate pi_update{PiUpdate::Exact};
  int threads{0};
  std::function<void(int, double)> on_iteration;
};

struct FitResult {
  FittedModel model;
  std::vector<double> trace;
  VariationalState state;
};

ZetaLambda compute_zeta_lambda(const VariationalState& state);
ExpectedTerms compute_expected_terms(const VariationalState& state);

// Moments of one censor entry's onset under its local natural parameter.
TruncMoments<double> entry_moments(std::uint8_t kind, double t, const GaussianNatural<double>& eta);

// u-term for one (entry, k): E log g + log h + E(eta)^T E(T).
double u_term(const NIG& p, CensorMark mark, double t_recorded, const GaussianNatural<double>& eta_local);

VariationalState initialize_state(const ActiveEntries& entries, const Hyperparameters& hyper,
                                  std::uint64_t seed);

// Moments for every latent entry, indexed like ActiveEntries::local.
std::vector<TruncMoments<double>> latent_moments(const ActiveEntries& entries,
                                                 const VariationalState& state, int threads = 1);

Intermediates accumulate_statistics(const ActiveEntries& entries, const VariationalState& state,
                                    const std::vector<TruncMoments<double>>& moments, int threads = 1);

// Throws std::runtime_error when z_bar - n_bar is clearly negative.
void update_global(const Hyperparameters& hyper, const Intermediates& stats, VariationalState& state);

void update_responsibilities(const ActiveEntries& entries, VariationalState& state,
                             const ZetaLambda& zl, const ExpectedTerms& terms,
                             const std::vector<TruncMoments<double>>& moments, int threads = 1);

void update_incomplete_latents(const ActiveEntries& entries, VariationalState& state,
                               const ZetaLambda& zl, const ExpectedTerms& terms,
                               PiUpdate mode = PiUpdate::Exact, int threads = 1);

void update_unreliable_latents(const ActiveEntries& entries, VariationalState& state,
                               const ExpectedTerms& terms, int threads = 1);

// Log-odds of presence for an Incomplete entry, both forms.
double incomplete_log_odds(const Eigen::Ref<const Eigen::RowVectorXd>& gamma, std::size_t m, double tau,
                           const GaussianNatural<double>& eta_local, const ZetaLambda& zl,
                           const ExpectedTerms& terms, PiUpdate mode);

// Flattened (theta*, a*, b*, u*, v*, alpha*, beta*).
VectorX global_vector(const VariationalState& state);
std::size_t global_parameter_count(std::size_t M, std::size_t K);

FitResult fit(const Dataset& data, const Hyperparameters& hyper, const FitOptions& options);

}  // namespace accrual

#endif  // ACCRUAL_VB_HPP
