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

#include "accrual/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

namespace accrual {

namespace {

VectorX softmax_log(const VectorX& lp) {
  const double mx = lp.maxCoeff();
  VectorX p = (lp.array() - mx).exp().matrix();
  return p / p.sum();
}

std::string index_field(const char* name, std::size_t i, const char* member = nullptr) {
  std::string f = std::string(name) + "[" + std::to_string(i) + "]";
  if (member) f += std::string(".") + member;
  return f;
}

}  // namespace

std::vector<double> age_grid(double from, double step, double max_age) {
  if (!(step > 0) || !std::isfinite(from)) throw std::domain_error("age_grid: step must be > 0");
  std::vector<double> g;
  if (from >= max_age) return {from};
  for (std::size_t i = 0;; ++i) {
    const double a = from + static_cast<double>(i) * step;
    if (a >= max_age) break;
    g.push_back(a);
  }
  g.push_back(max_age);
  return g;
}

Forecaster::Forecaster(FittedModel model) : model_(std::move(model)) {
  const std::size_t M = model_.M(), K = model_.K;
  if (static_cast<std::size_t>(model_.pi_bar.rows()) != M || static_cast<std::size_t>(model_.pi_bar.cols()) != K)
    throw std::invalid_argument("Forecaster: model shape mismatch");
  t_.reserve(M * K);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t k = 0; k < K; ++k)
      t_.push_back(accrual::predictive(model_.nig(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k))));
  log_theta_ = model_.theta_bar.array().log().matrix();
}

std::vector<FieldError> Forecaster::validate(const PartialTrajectory& p) const {
  std::vector<FieldError> err;
  if (!std::isfinite(p.rho_prime) || p.rho_prime < 0)
    err.push_back({"baseline_age", "must be a finite age >= 0"});
  if (!std::isfinite(p.tau_prime) || p.tau_prime < 0)
    err.push_back({"current_age", "must be a finite age >= 0"});
  else if (std::isfinite(p.rho_prime) && p.tau_prime < p.rho_prime)
    err.push_back({"current_age", "must be >= baseline_age"});
  std::vector<char> seen(M(), 0);
  auto claim = [&](std::size_t m, const std::string& field) {
    if (m >= M()) {
      err.push_back({field, "unknown condition"});
      return;
    }
    if (seen[m]) err.push_back({field, "condition listed more than once"});
    seen[m] = 1;
    if (sex_excluded(model_.conditions[m], p.sex)) err.push_back({field, "condition is not possible for this sex"});
  };
  for (std::size_t i = 0; i < p.observed.size(); ++i) {
    claim(p.observed[i].first, index_field("observed", i, "code"));
    const double a = p.observed[i].second;
    if (!std::isfinite(a)) err.push_back({index_field("observed", i, "age"), "must be a finite age"});
    else if (a <= p.rho_prime) err.push_back({index_field("observed", i, "age"), "must be > baseline_age"});
    else if (a > p.tau_prime) err.push_back({index_field("observed", i, "age"), "must be <= current_age"});
  }
  for (std::size_t i = 0; i < p.unreliable.size(); ++i) claim(p.unreliable[i], index_field("unreliable", i));
  return err;
}

std::vector<ConditionStatus> Forecaster::statuses(const PartialTrajectory& p) const {
  std::vector<ConditionStatus> s(M(), ConditionStatus::Open);
  for (std::size_t m = 0; m < M(); ++m)
    if (known_absent_exempt(model_.conditions[m], p.sex, p.tau_prime)) s[m] = ConditionStatus::KnownAbsent;
  for (const auto& [m, age] : p.observed) s.at(m) = ConditionStatus::History;
  for (std::size_t m : p.unreliable) s.at(m) = ConditionStatus::History;
  return s;
}

VectorX Forecaster::cluster_posterior(const PartialTrajectory& p) const {
  const std::size_t K = this->K();
  VectorX lp = log_theta_;
  const auto status = statuses(p);
  for (const auto& [m, age] : p.observed)
    for (std::size_t k = 0; k < K; ++k)
      lp(static_cast<Eigen::Index>(k)) += std::log(pi_bar(m, k)) + predictive(m, k).log_pdf(age);
  for (std::size_t m : p.unreliable)
    for (std::size_t k = 0; k < K; ++k)
      lp(static_cast<Eigen::Index>(k)) += std::log(pi_bar(m, k)) + predictive(m, k).log_cdf(p.rho_prime);
  for (std::size_t m = 0; m < M(); ++m) {
    if (status[m] == ConditionStatus::History) continue;
    for (std::size_t k = 0; k < K; ++k) {
      const double pb = pi_bar(m, k);
      lp(static_cast<Eigen::Index>(k)) += status[m] == ConditionStatus::KnownAbsent
                                              ? std::log1p(-pb)
                                              : std::log1p(-pb * predictive(m, k).cdf(p.tau_prime));
    }
  }
  return softmax_log(lp);
}

VectorX Forecaster::trajectory_posterior(const Trajectory& tr) const {
  if (tr.kappa.size() != M()) throw std::invalid_argument("trajectory_posterior: length mismatch");
  VectorX lp = log_theta_;
  for (std::size_t m = 0; m < M(); ++m) {
    for (std::size_t k = 0; k < K(); ++k) {
      const double pb = pi_bar(m, k);
      const auto& st = predictive(m, k);
      double term = 0;
      switch (tr.kappa[m]) {
        case CensorMark::Observed:
          term = tr.d[m] == Presence::Present ? std::log(pb) + st.log_pdf(tr.t[m]) : std::log1p(-pb);
          break;
        case CensorMark::Unreliable:
          term = std::log(pb) + st.log_cdf(tr.rho);
          break;
        case CensorMark::Incomplete:
          term = std::log1p(-pb * st.cdf(tr.tau));
          break;
      }
      lp(static_cast<Eigen::Index>(k)) += term;
    }
  }
  return softmax_log(lp);
}

double Forecaster::surviving_presence_prob(std::size_t m, std::size_t k, double tau_prime) const {
  const double pb = pi_bar(m, k);
  const double s = predictive(m, k).survival(tau_prime);
  return pb * s / (pb * s + 1.0 - pb);
}

double Forecaster::window_risk(const VectorX& phi, std::size_t m, double lo, double hi) const {
  if (!(hi > lo)) return 0.0;
  double r = 0;
  for (std::size_t k = 0; k < K(); ++k) {
    const double pb = pi_bar(m, k);
    const auto& st = predictive(m, k);
    const double s_lo = st.survival(lo);
    const double s_hi = st.survival(hi);
    r += phi(static_cast<Eigen::Index>(k)) * pb * (s_lo - s_hi) / (pb * s_lo + 1.0 - pb);
  }
  return r;
}

double Forecaster::total_future_risk(const VectorX& phi, std::size_t m, double tau_prime) const {
  double r = 0;
  for (std::size_t k = 0; k < K(); ++k)
    r += phi(static_cast<Eigen::Index>(k)) * surviving_presence_prob(m, k, tau_prime);
  return r;
}

std::vector<double> Forecaster::risk_curve(const VectorX& phi, std::size_t m, double tau_prime,
                                           const std::vector<double>& grid) const {
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::domain_error("risk_curve: grid must be ascending");
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) out.push_back(g <= tau_prime ? 0.0 : window_risk(phi, m, tau_prime, g));
  return out;
}

std::vector<double> Forecaster::risk_curve(const PartialTrajectory& p, std::size_t m,
                                           const std::vector<double>& grid) const {
  return risk_curve(cluster_posterior(p), m, p.tau_prime, grid);
}

std::optional<double> Forecaster::window_mean_onset(const VectorX& phi, std::size_t m, double lo,
                                                    double hi) const {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < K(); ++k) {
    const double pb = pi_bar(m, k);
    const auto& st = predictive(m, k);
    const double w = phi(static_cast<Eigen::Index>(k)) * pb / (1.0 - pb * st.cdf(lo));
    if (w == 0) continue;
    num += w * st.partial_mean(lo, hi);
    den += w * (st.survival(lo) - st.survival(hi));
  }
  if (!(den > 0)) return std::nullopt;
  return std::clamp(num / den, lo, hi);
}

std::optional<double> Forecaster::window_map_onset(const VectorX& phi, std::size_t m, double lo,
                                                   double hi) const {
  if (!(hi > lo)) return std::nullopt;
  std::vector<double> w(K());
  double wsum = 0;
  for (std::size_t k = 0; k < K(); ++k) {
    const double pb = pi_bar(m, k);
    w[k] = phi(static_cast<Eigen::Index>(k)) * pb / (1.0 - pb * predictive(m, k).cdf(lo));
    wsum += w[k];
  }
  if (!(wsum > 0)) return std::nullopt;
  auto density = [&](double t) {
    double s = 0;
    for (std::size_t k = 0; k < K(); ++k)
      if (w[k] > 0) s += w[k] * predictive(m, k).pdf(t);
    return s;
  };
  const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / kMapGridStep - 1e-9));
  double best_t = lo, best = -1;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = std::min(hi, lo + static_cast<double>(i) * kMapGridStep);
    const double f = density(t);
    if (f > best) {
      best = f;
      best_t = t;
      best_i = i;
    }
  }
  // golden-section refinement inside the neighbouring grid cells
  double a = std::max(lo, best_t - (best_i > 0 ? kMapGridStep : 0.0));
  double b = std::min(hi, best_t + kMapGridStep);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = density(c), fd = density(d);
  for (int it = 0; it < 60 && b - a > 1e-10; ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = density(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = density(d);
    }
  }
  const double refined = 0.5 * (a + b);
  return density(refined) >= best ? refined : best_t;
}

std::vector<double> Forecaster::per_cluster_population_risk(std::size_t m, std::size_t k,
                                                            const std::vector<double>& grid) const {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) out.push_back(pi_bar(m, k) * predictive(m, k).cdf(g));
  return out;
}

std::vector<double> Forecaster::population_risk(std::size_t m, const std::vector<double>& grid) const {
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t k = 0; k < K(); ++k) {
    const auto c = per_cluster_population_risk(m, k, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] += model_.theta_bar(static_cast<Eigen::Index>(k)) * c[i];
  }
  return out;
}

std::vector<FutureEvent> Forecaster::sample_future(const PartialTrajectory& p, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const VectorX phi = cluster_posterior(p);
  const double uk = unif(rng);
  std::size_t k = 0;
  for (double acc = phi(0); k + 1 < K() && uk >= acc; acc += phi(static_cast<Eigen::Index>(++k))) {
  }
  const auto status = statuses(p);
  std::vector<FutureEvent> out;
  for (std::size_t m = 0; m < M(); ++m) {
    if (status[m] != ConditionStatus::Open) continue;
    const double pt = surviving_presence_prob(m, k, p.tau_prime);
    const double u1 = unif(rng);
    const double u2 = unif(rng);
    if (!(u1 < pt)) {
      out.push_back({m, false, std::nullopt});
      continue;
    }
    const auto& st = predictive(m, k);
    const double s0 = st.survival(p.tau_prime);
    const double v = std::max(s0 * (1.0 - u2), std::numeric_limits<double>::min());
    boost::math::students_t_distribution<double, detail::no_promote> dist(st.df);
    double t = st.loc + st.scale * boost::math::quantile(boost::math::complement(dist, v));
    if (!(t > p.tau_prime)) t = std::nextafter(p.tau_prime, std::numeric_limits<double>::infinity());
    out.push_back({m, true, t});
  }
  return out;
}

std::vector<WindowPrediction> Forecaster::predict_window(const PartialTrajectory& p, double horizon) const {
  if (!(horizon > 0)) throw std::domain_error("predict_window: horizon must be > 0");
  const VectorX phi = cluster_posterior(p);
  const auto status = statuses(p);
  std::vector<WindowPrediction> out(M());
  const double hi = p.tau_prime + horizon;
  for (std::size_t m = 0; m < M(); ++m) {
    if (status[m] != ConditionStatus::Open) continue;
    out[m].prob_within = window_risk(phi, m, p.tau_prime, hi);
    if (std::isfinite(hi)) out[m].map_onset = window_map_onset(phi, m, p.tau_prime, hi);
  }
  return out;
}

RiskProfile Forecaster::profile(const PartialTrajectory& p, double horizon, double grid_step) const {
  if (!(horizon > 0)) throw std::domain_error("profile: horizon must be > 0");
  RiskProfile rp;
  rp.horizon = horizon;
  rp.cluster_probs = cluster_posterior(p);
  const auto status = statuses(p);
  const auto grid = age_grid(p.tau_prime, grid_step);
  const double hi = p.tau_prime + horizon;
  rp.conditions.resize(M());
  for (std::size_t m = 0; m < M(); ++m) {
    auto& c = rp.conditions[m];
    c.m = m;
    c.status = status[m];
    c.ages = grid;
    if (status[m] != ConditionStatus::Open) {
      c.risk.assign(grid.size(), 0.0);
      continue;
    }
    c.total_future_risk = total_future_risk(rp.cluster_probs, m, p.tau_prime);
    c.prob_within = window_risk(rp.cluster_probs, m, p.tau_prime, hi);
    c.map_onset = window_map_onset(rp.cluster_probs, m, p.tau_prime, hi);
    c.risk = risk_curve(rp.cluster_probs, m, p.tau_prime, grid);
  }
  return rp;
}

std::vector<double> Forecaster::below_zero_mass() const {
  std::vector<double> out(M(), 0.0);
  for (std::size_t m = 0; m < M(); ++m)
    for (std::size_t k = 0; k < K(); ++k)
      out[m] += model_.theta_bar(static_cast<Eigen::Index>(k)) * pi_bar(m, k) * predictive(m, k).cdf(0.0);
  return out;
}

VectorX cluster_posterior(const FittedModel& model, const PartialTrajectory& p) {
  return Forecaster(model).cluster_posterior(p);
}

double surviving_presence_prob(const FittedModel& model, std::size_t m, std::size_t k, double tau_prime) {
  return Forecaster(model).surviving_presence_prob(m, k, tau_prime);
}

std::vector<double> risk_curve(const FittedModel& model, const PartialTrajectory& p, std::size_t m,
                               const std::vector<double>& grid) {
  return Forecaster(model).risk_curve(p, m, grid);
}

std::vector<double> per_cluster_population_risk(const FittedModel& model, std::size_t m, std::size_t k,
                                                const std::vector<double>& grid) {
  return Forecaster(model).per_cluster_population_risk(m, k, grid);
}

std::vector<FutureEvent> sample_future(const FittedModel& model, const PartialTrajectory& p, std::uint64_t seed) {
  return Forecaster(model).sample_future(p, seed);
}

std::vector<WindowPrediction> predict_window(const FittedModel& model, const PartialTrajectory& p, double horizon) {
  return Forecaster(model).predict_window(p, horizon);
}

}  // namespace accrual
