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

#include "accrual/vb.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "accrual/parallel.hpp"

namespace accrual {

namespace {

constexpr std::uint64_t kInitSalt = 0x1a17;

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t num_individuals(const ActiveEntries& e) { return e.offset.size() - 1; }

void check_shapes(const ActiveEntries& entries, const VariationalState& s) {
  if (static_cast<std::size_t>(s.resp.rows()) != num_individuals(entries))
    throw std::invalid_argument("responsibility rows do not match the data");
}

// Updates eta (and pi for Incomplete) for entries whose kind is selected.
void update_latents(const ActiveEntries& entries, VariationalState& state, const ZetaLambda* zl,
                    const ExpectedTerms& terms, PiUpdate mode, bool do_incomplete,
                    bool do_unreliable, int threads) {
  check_shapes(entries, state);
  const auto K = static_cast<Eigen::Index>(state.K());
  parallel_blocks(num_individuals(entries), threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n) {
      const auto gamma = state.resp.row(static_cast<Eigen::Index>(n));
      for (std::size_t e = entries.offset[n]; e < entries.offset[n + 1]; ++e) {
        const auto kind = entries.kind[e];
        if (kind == EntryKind::Observed) continue;
        if (kind == EntryKind::Incomplete && !do_incomplete) continue;
        if (kind == EntryKind::Unreliable && !do_unreliable) continue;
        const auto m = static_cast<Eigen::Index>(entries.m[e]);
        double h1 = 0, h2 = 0;
        for (Eigen::Index k = 0; k < K; ++k) {
          h1 += gamma(k) * terms.e_eta1(m, k);
          h2 += gamma(k) * terms.e_eta2(m, k);
        }
        const auto j = entries.local[e];
        state.eta_local[j] = {h1, h2};
        if (kind == EntryKind::Incomplete) {
          state.pi_local[j] = logistic(incomplete_log_odds(gamma, entries.m[e], entries.t[e],
                                                           state.eta_local[j], *zl, terms, mode));
        }
      }
    }
  }, kBlockSize);
}

}  // namespace

ZetaLambda compute_zeta_lambda(const VariationalState& s) {
  const auto M = s.a_star.rows();
  const auto K = s.a_star.cols();
  ZetaLambda out;
  out.zeta.resize(s.theta_star.size());
  out.lambda.resize(M, K);
  const double psi_total = digamma(s.theta_star.sum());
  for (Eigen::Index k = 0; k < s.theta_star.size(); ++k) {
    double z = digamma(s.theta_star(k)) - psi_total;
    for (Eigen::Index m = 0; m < M; ++m) {
      const double a = s.a_star(m, k);
      const double b = s.b_star(m, k);
      const double psi_b = digamma(b);
      z += psi_b - digamma(a + b);
      out.lambda(m, k) = digamma(a) - psi_b;
    }
    out.zeta(k) = z;
  }
  return out;
}

ExpectedTerms compute_expected_terms(const VariationalState& s) {
  const auto M = s.u_star.rows();
  const auto K = s.u_star.cols();
  ExpectedTerms t;
  t.e_log_g.resize(M, K);
  t.e_eta1.resize(M, K);
  t.e_eta2.resize(M, K);
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index k = 0; k < K; ++k) {
      const NIG p = s.nig(m, k);
      const auto eta = expected_natural(p);
      t.e_log_g(m, k) = expected_log_g(p);
      t.e_eta1(m, k) = eta.eta1;
      t.e_eta2(m, k) = eta.eta2;
    }
  return t;
}

TruncMoments<double> entry_moments(std::uint8_t kind, double t, const GaussianNatural<double>& eta) {
  switch (kind) {
    case EntryKind::Unreliable:
      return truncated_normal_moments(eta.mean(), eta.sd(), TruncSide<double>::right_of(t));
    case EntryKind::Incomplete:
      return truncated_normal_moments(eta.mean(), eta.sd(), TruncSide<double>::left_of(t));
    default:
      return {t, t * t};
  }
}

double u_term(const NIG& p, CensorMark mark, double t_recorded, const GaussianNatural<double>& eta_local) {
  std::uint8_t kind = EntryKind::Observed;
  if (mark == CensorMark::Unreliable) kind = EntryKind::Unreliable;
  if (mark == CensorMark::Incomplete) kind = EntryKind::Incomplete;
  const auto mom = entry_moments(kind, t_recorded, eta_local);
  const auto eta = expected_natural(p);
  return expected_log_g(p) + log_h<double>() + eta.eta1 * mom.e_t + eta.eta2 * mom.e_t2;
}

double incomplete_log_odds(const Eigen::Ref<const Eigen::RowVectorXd>& gamma, std::size_t m, double tau,
                           const GaussianNatural<double>& eta_local, const ZetaLambda& zl,
                           const ExpectedTerms& terms, PiUpdate mode) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto K = gamma.size();
  if (mode == PiUpdate::Literal) {
    const auto mom = entry_moments(EntryKind::Incomplete, tau, eta_local);
    double s = 0;
    for (Eigen::Index k = 0; k < K; ++k)
      s += gamma(k) * (zl.lambda(mi, k) + terms.e_log_g(mi, k) + log_h<double>() +
                       terms.e_eta1(mi, k) * mom.e_t + terms.e_eta2(mi, k) * mom.e_t2);
    return s;
  }
  double s = 0;
  for (Eigen::Index k = 0; k < K; ++k) s += gamma(k) * (zl.lambda(mi, k) + terms.e_log_g(mi, k));
  const double mean = eta_local.mean();
  const double sd = eta_local.sd();
  return s - log_g(eta_local) + log_normal_survival((tau - mean) / sd);
}

VariationalState initialize_state(const ActiveEntries& entries, const Hyperparameters& hyper,
                                  std::uint64_t seed) {
  const std::size_t N = num_individuals(entries);
  const auto K = static_cast<Eigen::Index>(hyper.K());
  if (K < 1) throw std::domain_error("initialize_state: K must be >= 1");
  VariationalState s;
  s.theta_star = hyper.theta;
  s.a_star = hyper.a;
  s.b_star = hyper.b;
  s.u_star = hyper.u;
  s.v_star = hyper.v;
  s.alpha_star = hyper.alpha;
  s.beta_star = hyper.beta;
  s.resp.resize(static_cast<Eigen::Index>(N), K);
  for (std::size_t n = 0; n < N; ++n) {
    const auto row = static_cast<Eigen::Index>(n);
    if (K == 1) {
      s.resp(row, 0) = 1.0;
      continue;
    }
    std::mt19937_64 rng(stream_seed(seed, n, kInitSalt));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double total = 0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const double x = -std::log1p(-unif(rng));
      s.resp(row, k) = x;
      total += x;
    }
    s.resp.row(row) /= total;
  }
  const ExpectedTerms prior = compute_expected_terms(s);
  s.pi_local.assign(entries.n_latent, 0.5);
  s.eta_local.assign(entries.n_latent, {});
  for (std::size_t n = 0; n < N; ++n) {
    const auto gamma = s.resp.row(static_cast<Eigen::Index>(n));
    for (std::size_t e = entries.offset[n]; e < entries.offset[n + 1]; ++e) {
      if (entries.local[e] == ActiveEntries::npos) continue;
      const auto m = static_cast<Eigen::Index>(entries.m[e]);
      double h1 = 0, h2 = 0;
      for (Eigen::Index k = 0; k < K; ++k) {
        h1 += gamma(k) * prior.e_eta1(m, k);
        h2 += gamma(k) * prior.e_eta2(m, k);
      }
      s.eta_local[entries.local[e]] = {h1, h2};
    }
  }
  return s;
}

std::vector<TruncMoments<double>> latent_moments(const ActiveEntries& entries, const VariationalState& state,
                                                 int threads) {
  std::vector<TruncMoments<double>> out(entries.n_latent);
  parallel_blocks(num_individuals(entries), threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t e = entries.offset[lo]; e < entries.offset[hi]; ++e) {
      const auto j = entries.local[e];
      if (j == ActiveEntries::npos) continue;
      out[j] = entry_moments(entries.kind[e], entries.t[e], state.eta_local[j]);
    }
  });
  return out;
}

Intermediates accumulate_statistics(const ActiveEntries& entries, const VariationalState& state,
                                    const std::vector<TruncMoments<double>>& moments, int threads) {
  check_shapes(entries, state);
  const std::size_t N = num_individuals(entries);
  const auto K = static_cast<Eigen::Index>(state.K());
  const auto M = state.a_star.rows();
  const std::size_t nb = block_count(N);
  const std::size_t mk = static_cast<std::size_t>(M * K);
  // per block: z (K) then n, t1, t2 (M*K each, row-major)
  const std::size_t stride = static_cast<std::size_t>(K) + 3 * mk;
  std::vector<double> partial(nb * stride, 0.0);

  parallel_blocks(N, threads, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    double* z = partial.data() + b * stride;
    double* nn = z + K;
    double* t1 = nn + mk;
    double* t2 = t1 + mk;
    for (std::size_t n = lo; n < hi; ++n) {
      const auto gamma = state.resp.row(static_cast<Eigen::Index>(n));
      for (Eigen::Index k = 0; k < K; ++k) z[k] += gamma(k);
      for (std::size_t e = entries.offset[n]; e < entries.offset[n + 1]; ++e) {
        const auto j = entries.local[e];
        double w = 1.0, e1, e2;
        if (j == ActiveEntries::npos) {
          e1 = entries.t[e];
          e2 = e1 * e1;
        } else {
          if (entries.kind[e] == EntryKind::Incomplete) w = state.pi_local[j];
          e1 = moments[j].e_t;
          e2 = moments[j].e_t2;
        }
        if (w == 0.0) continue;
        const std::size_t base = static_cast<std::size_t>(entries.m[e]) * static_cast<std::size_t>(K);
        for (Eigen::Index k = 0; k < K; ++k) {
          const double g = w * gamma(k);
          nn[base + k] += g;
          t1[base + k] += g * e1;
          t2[base + k] += g * e2;
        }
      }
    }
  });

  Intermediates out;
  out.z_bar = VectorX::Zero(K);
  out.n_bar = MatrixX::Zero(M, K);
  out.t1_bar = MatrixX::Zero(M, K);
  out.t2_bar = MatrixX::Zero(M, K);
  for (std::size_t b = 0; b < nb; ++b) {
    const double* z = partial.data() + b * stride;
    for (Eigen::Index k = 0; k < K; ++k) out.z_bar(k) += z[k];
    for (Eigen::Index m = 0; m < M; ++m)
      for (Eigen::Index k = 0; k < K; ++k) {
        const std::size_t i = static_cast<std::size_t>(m * K + k);
        out.n_bar(m, k) += z[K + i];
        out.t1_bar(m, k) += z[K + mk + i];
        out.t2_bar(m, k) += z[K + 2 * mk + i];
      }
  }
  return out;
}

void update_global(const Hyperparameters& hyper, const Intermediates& stats, VariationalState& state) {
  const auto M = hyper.a.rows();
  const auto K = hyper.a.cols();
  state.theta_star = hyper.theta + stats.z_bar;
  state.a_star = hyper.a + stats.n_bar;
  state.b_star.resize(M, K);
  state.u_star.resize(M, K);
  state.v_star.resize(M, K);
  state.alpha_star.resize(M, K);
  state.beta_star.resize(M, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double tol = 1e-6 * std::max(1.0, stats.z_bar(k));
    for (Eigen::Index m = 0; m < M; ++m) {
      double gap = stats.z_bar(k) - stats.n_bar(m, k);
      if (gap < -tol) {
        std::ostringstream msg;
        msg << "update_global: n_bar exceeds z_bar at (" << m << ", " << k << ") by " << -gap;
        throw std::runtime_error(msg.str());
      }
      gap = std::max(gap, 0.0);
      state.b_star(m, k) = hyper.b(m, k) + gap;
      const NIG post = nig_update(hyper.nig(m, k),
                                  SuffStats<double>{stats.t1_bar(m, k), stats.t2_bar(m, k), stats.n_bar(m, k)});
      state.u_star(m, k) = post.u;
      state.v_star(m, k) = post.v;
      state.alpha_star(m, k) = post.alpha;
      state.beta_star(m, k) = post.beta;
    }
  }
}

void update_responsibilities(const ActiveEntries& entries, VariationalState& state, const ZetaLambda& zl,
                             const ExpectedTerms& terms, const std::vector<TruncMoments<double>>& moments,
                             int threads) {
  check_shapes(entries, state);
  const auto K = static_cast<Eigen::Index>(state.K());
  const RowMatrixX base = (zl.lambda + terms.e_log_g).array() + log_h<double>();
  parallel_blocks(num_individuals(entries), threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    Eigen::VectorXd c(K);
    for (std::size_t n = lo; n < hi; ++n) {
      c = zl.zeta;
      for (std::size_t e = entries.offset[n]; e < entries.offset[n + 1]; ++e) {
        const auto j = entries.local[e];
        double w = 1.0, e1, e2;
        if (j == ActiveEntries::npos) {
          e1 = entries.t[e];
          e2 = e1 * e1;
        } else {
          if (entries.kind[e] == EntryKind::Incomplete) w = state.pi_local[j];
          e1 = moments[j].e_t;
          e2 = moments[j].e_t2;
        }
        const auto m = static_cast<Eigen::Index>(entries.m[e]);
        for (Eigen::Index k = 0; k < K; ++k)
          c(k) += w * (base(m, k) + terms.e_eta1(m, k) * e1 + terms.e_eta2(m, k) * e2);
      }
      const double cmax = c.maxCoeff();
      double total = 0;
      for (Eigen::Index k = 0; k < K; ++k) {
        c(k) = std::exp(c(k) - cmax);
        total += c(k);
      }
      state.resp.row(static_cast<Eigen::Index>(n)) = c.transpose() / total;
    }
  });
}

void update_incomplete_latents(const ActiveEntries& entries, VariationalState& state, const ZetaLambda& zl,
                               const ExpectedTerms& terms, PiUpdate mode, int threads) {
  update_latents(entries, state, &zl, terms, mode, true, false, threads);
}

void update_unreliable_latents(const ActiveEntries& entries, VariationalState& state,
                               const ExpectedTerms& terms, int threads) {
  update_latents(entries, state, nullptr, terms, PiUpdate::Exact, false, true, threads);
}

std::size_t global_parameter_count(std::size_t M, std::size_t K) { return K + 6 * M * K; }

VectorX global_vector(const VariationalState& s) {
  const auto K = s.theta_star.size();
  const auto MK = s.a_star.size();
  VectorX out(K + 6 * MK);
  out.head(K) = s.theta_star;
  Eigen::Index at = K;
  for (const MatrixX* x : {&s.a_star, &s.b_star, &s.u_star, &s.v_star, &s.alpha_star, &s.beta_star}) {
    out.segment(at, MK) = x->reshaped();
    at += MK;
  }
  return out;
}

FitResult fit(const Dataset& data, const Hyperparameters& hyper, const FitOptions& options) {
  if (options.K < 1) throw std::domain_error("fit: K must be >= 1");
  if (hyper.K() != options.K || hyper.M() != data.M())
    throw std::invalid_argument("fit: hyperparameter shape does not match K and M");
  if (!hyper.valid()) throw std::invalid_argument("fit: invalid hyperparameters");
  if (const auto v = validate_dataset(data); !v.empty())
    throw std::invalid_argument("fit: dataset has " + std::to_string(v.size()) + " violations");

  const int threads = resolve_threads(options.threads);
  const ActiveEntries entries = ActiveEntries::build(data);
  FitResult result;
  VariationalState& state = result.state;
  state = initialize_state(entries, hyper, options.seed);

  const double eps = options.epsilon > 0
                         ? options.epsilon
                         : 1e-4 * std::sqrt(static_cast<double>(global_parameter_count(data.M(), options.K)));
  VectorX prev = global_vector(state);
  FitMeta meta;
  meta.seed = options.seed;
  meta.epsilon = eps;
  meta.pi_update = options.pi_update;
  meta.hyper = hyper;

  for (int it = 1; it <= options.max_iter; ++it) {
    const auto moments = latent_moments(entries, state, threads);
    const Intermediates stats = accumulate_statistics(entries, state, moments, threads);
    update_global(hyper, stats, state);
    const ZetaLambda zl = compute_zeta_lambda(state);
    const ExpectedTerms terms = compute_expected_terms(state);
    update_responsibilities(entries, state, zl, terms, moments, threads);
    update_latents(entries, state, &zl, terms, options.pi_update, true, true, threads);

    VectorX cur = global_vector(state);
    const double delta = (cur - prev).norm();
    prev = std::move(cur);
    result.trace.push_back(delta);
    meta.iterations = it;
    meta.final_delta = delta;
    if (options.on_iteration) options.on_iteration(it, delta);
    if (delta < eps) {
      meta.converged = true;
      break;
    }
  }
  result.model = FittedModel::from_state(state, data.conditions, std::move(meta));
  return result;
}

}  // namespace accrual
