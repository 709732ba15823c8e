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

#include "accrual/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "accrual/parallel.hpp"

namespace accrual {

namespace {

constexpr std::uint64_t kGlobalSalt = 0x9106a1;
constexpr std::uint64_t kPersonSalt = 0x9e75;

// log of a Gamma(shape, 1) draw; boosts small shapes via U^(1/a).
double log_gamma_draw(std::mt19937_64& rng, double shape) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (shape >= 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    return std::log(g(rng));
  }
  std::gamma_distribution<double> g(shape + 1.0, 1.0);
  const double lg = std::log(g(rng));
  const double u = 1.0 - unif(rng);  // (0, 1]
  return lg + std::log(u) / shape;
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("sim config: ") + what); };
  if (N == 0) fail("N must be positive");
  if (M == 0 || M > 0xffff) fail("M must be in [1, 65535]");
  if (K == 0) fail("K must be positive");
  if (!(weight_lo >= 0 && weight_lo <= weight_hi && weight_hi <= 1)) fail("weight range invalid");
  if (static_cast<double>(K) * weight_hi < 1.0 || static_cast<double>(K) * weight_lo > 1.0)
    fail("infeasible cluster weight bounds for K");
  if (!(prevalence_a > 0 && prevalence_b > 0)) fail("prevalence prior must be positive");
  if (!onset.valid()) fail("onset prior invalid");
  if (!(baseline_lo >= 0 && baseline_lo <= baseline_hi)) fail("baseline range invalid");
  if (!(followup_years >= 0)) fail("followup_years must be >= 0");
  if (!(death_prob >= 0 && death_prob <= 1)) fail("death_prob must be in [0, 1]");
  if (!(train_fraction >= 0 && train_fraction <= 1)) fail("train_fraction must be in [0, 1]");
}

double sample_beta(std::mt19937_64& rng, double a, double b) {
  const double la = log_gamma_draw(rng, a);
  const double lb = log_gamma_draw(rng, b);
  const double mx = std::max(la, lb);
  return std::exp(la - mx - std::log(std::exp(la - mx) + std::exp(lb - mx)));
}

VectorX sample_bounded_weights(std::mt19937_64& rng, std::size_t K, double lo, double hi,
                               std::size_t max_draws) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  VectorX w(static_cast<Eigen::Index>(K));
  for (std::size_t draw = 0; draw < max_draws; ++draw) {
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = -std::log1p(-unif(rng));
    w /= w.sum();
    if (w.minCoeff() >= lo && w.maxCoeff() <= hi) return w;
  }
  throw std::runtime_error("cluster weight rejection sampling exhausted its draw budget");
}

std::vector<ConditionMeta> synthetic_conditions(std::size_t M) {
  std::vector<ConditionMeta> out(M);
  const int width = M >= 100 ? 3 : 2;
  for (std::size_t m = 0; m < M; ++m) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "C%0*zu", width, m + 1);
    out[m].code = buf;
    out[m].name = "condition " + std::to_string(m + 1);
  }
  return out;
}

SimResult generate(const SimConfig& cfg, int threads) {
  cfg.validate();
  const auto M = static_cast<Eigen::Index>(cfg.M);
  const auto K = static_cast<Eigen::Index>(cfg.K);
  std::mt19937_64 rng(stream_seed(cfg.seed, 0, kGlobalSalt));

  SimResult res;
  TrueParams& tp = res.truth;
  tp.weights = sample_bounded_weights(rng, cfg.K, cfg.weight_lo, cfg.weight_hi, cfg.max_weight_draws);
  tp.pi.resize(M, K);
  tp.mu.resize(M, K);
  tp.sigma2.resize(M, K);
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index k = 0; k < K; ++k) tp.pi(m, k) = sample_beta(rng, cfg.prevalence_a, cfg.prevalence_b);
  {
    std::gamma_distribution<double> prec(cfg.onset.alpha, 1.0 / cfg.onset.beta);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index k = 0; k < K; ++k) {
        const double s2 = 1.0 / prec(rng);
        tp.sigma2(m, k) = s2;
        tp.mu(m, k) = cfg.onset.u + std::sqrt(s2 / cfg.onset.v) * norm(rng);
      }
  }

  std::vector<std::size_t> order(cfg.N);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(cfg.N)));
  std::vector<char> in_train(cfg.N, 0);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

  std::vector<double> cum(static_cast<std::size_t>(K));
  std::partial_sum(tp.weights.data(), tp.weights.data() + K, cum.begin());
  cum.back() = 1.0;

  std::vector<Trajectory> people(cfg.N);
  std::vector<int> labels(cfg.N);
  std::vector<std::size_t> latent_count(cfg.N), recorded_count(cfg.N);
  const int width = static_cast<int>(std::to_string(cfg.N).size());

  parallel_blocks(cfg.N, threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> norm(0.0, 1.0);
    for (std::size_t n = lo; n < hi; ++n) {
      std::mt19937_64 r(stream_seed(cfg.seed, n, kPersonSalt));
      const double uz = unif(r);
      const auto z = static_cast<Eigen::Index>(std::upper_bound(cum.begin(), cum.end(), uz) - cum.begin());
      const Eigen::Index k = std::min(z, K - 1);
      const double rho = cfg.baseline_lo + (cfg.baseline_hi - cfg.baseline_lo) * unif(r);
      const double tau = rho + cfg.followup_years;
      const bool dead = unif(r) < cfg.death_prob;

      Trajectory& p = people[n];
      char buf[32];
      std::snprintf(buf, sizeof buf, "P%0*zu", width, n + 1);
      p.id = buf;
      p.rho = rho;
      p.tau = tau;
      p.iota = dead ? Vital::Dead : Vital::Alive;
      p.d.resize(cfg.M);
      p.t.resize(cfg.M);
      p.kappa.resize(cfg.M);
      std::size_t latent = 0, recorded = 0;
      for (Eigen::Index m = 0; m < M; ++m) {
        const bool present = unif(r) < tp.pi(m, k);
        const double onset = tp.mu(m, k) + std::sqrt(tp.sigma2(m, k)) * norm(r);
        const auto i = static_cast<std::size_t>(m);
        latent += present;
        if (present && onset <= rho) {
          p.d[i] = Presence::Present;
          p.t[i] = rho;
          p.kappa[i] = CensorMark::Unreliable;
          ++recorded;
        } else if (present && onset <= tau) {
          p.d[i] = Presence::Present;
          p.t[i] = onset;
          p.kappa[i] = CensorMark::Observed;
          ++recorded;
        } else if (dead) {
          p.d[i] = Presence::Absent;
          p.t[i] = kNoAge;
          p.kappa[i] = CensorMark::Observed;
        } else {
          p.d[i] = Presence::Unknown;
          p.t[i] = tau;
          p.kappa[i] = CensorMark::Incomplete;
        }
      }
      labels[n] = static_cast<int>(k);
      latent_count[n] = latent;
      recorded_count[n] = recorded;
    }
  });

  const auto conditions = synthetic_conditions(cfg.M);
  res.train.conditions = conditions;
  res.test.conditions = conditions;
  res.train.individuals.reserve(n_train);
  res.test.individuals.reserve(cfg.N - n_train);
  double lat = 0, rec = 0;
  for (std::size_t n = 0; n < cfg.N; ++n) {
    lat += static_cast<double>(latent_count[n]);
    rec += static_cast<double>(recorded_count[n]);
    if (in_train[n]) {
      res.train.individuals.push_back(std::move(people[n]));
      res.train_labels.push_back(labels[n]);
    } else {
      res.test.individuals.push_back(std::move(people[n]));
      res.test_labels.push_back(labels[n]);
    }
  }
  res.mean_conditions = lat / static_cast<double>(cfg.N);
  res.mean_recorded_conditions = rec / static_cast<double>(cfg.N);
  return res;
}

}  // namespace accrual
