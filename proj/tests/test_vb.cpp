// Copyright 2026 The accrual Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <doctest.h>

#include "accrual/evaluation.hpp"
#include "accrual/vb.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace accrual;
using Approx = doctest::Approx;
namespace {

double bdigamma(double x) { return boost::math::digamma(x); }

const double kLogH = -0.5 * std::log(2 * M_PI);

VariationalState blank_state(Eigen::Index M, Eigen::Index K, Eigen::Index N = 0) {
  VariationalState s;
  s.theta_star = VectorX::Ones(K);
  s.a_star = MatrixX::Ones(M, K);
  s.b_star = MatrixX::Ones(M, K);
  s.u_star = MatrixX::Constant(M, K, 50.0);
  s.v_star = MatrixX::Constant(M, K, 0.3);
  s.alpha_star = MatrixX::Constant(M, K, 5.0);
  s.beta_star = MatrixX::Constant(M, K, 750.0);
  s.resp = RowMatrixX::Constant(N, K, 1.0 / static_cast<double>(K));
  return s;
}

void set_nig(VariationalState& s, Eigen::Index m, Eigen::Index k, const NIG& p) {
  s.u_star(m, k) = p.u;
  s.v_star(m, k) = p.v;
  s.alpha_star(m, k) = p.alpha;
  s.beta_star(m, k) = p.beta;
}

// Textbook E[log g] for the Gaussian: -E[mu^2/s2]/2 + E[log(1/s2)]/2.
double oracle_elg(const NIG& p) {
  return -0.5 * (p.u * p.u * p.alpha / p.beta + 1.0 / p.v) + 0.5 * (bdigamma(p.alpha) - std::log(p.beta));
}

// One full iteration in the documented order.
void iterate(const ActiveEntries& e, const Hyperparameters& h, VariationalState& s, int threads = 1,
             Intermediates* stats_out = nullptr) {
  const auto mom = latent_moments(e, s, threads);
  const auto stats = accumulate_statistics(e, s, mom, threads);
  if (stats_out) *stats_out = stats;
  update_global(h, stats, s);
  const auto zl = compute_zeta_lambda(s);
  const auto terms = compute_expected_terms(s);
  update_responsibilities(e, s, zl, terms, mom, threads);
  update_incomplete_latents(e, s, zl, terms, PiUpdate::Exact, threads);
  update_unreliable_latents(e, s, terms, threads);
}

Dataset separated(std::size_t per_cluster, std::uint64_t seed) {
  // Two clusters with disjoint condition sets and onsets near 30 vs 70.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> early(30, 3), late(70, 3);
  std::uniform_real_distribution<double> base(10, 20), coin(0, 1);
  Dataset ds;
  ds.conditions = fixture::conditions(6);
  for (std::size_t i = 0; i < 2 * per_cluster; ++i) {
    const bool c1 = i % 2 == 1;
    std::map<std::size_t, double> on;
    for (std::size_t m = 0; m < 3; ++m)
      if (m == 0 || coin(rng) < 0.8) on[c1 ? m + 3 : m] = c1 ? late(rng) : early(rng);
    const double rho = base(rng);
    ds.individuals.push_back(fixture::person("p" + std::to_string(i), 6, rho, rho + 70, coin(rng) < 0.7, on));
  }
  return ds;
}

}  // namespace

TEST_CASE("zeta and lambda, worked values") {
  auto s = blank_state(1, 2);
  auto zl = compute_zeta_lambda(s);
  CHECK(zl.zeta(0) == Approx(-2.0).epsilon(1e-13));
  CHECK(zl.zeta(1) == Approx(-2.0).epsilon(1e-13));
  CHECK(zl.lambda.isZero(0.0));
  s.a_star(0, 1) = 2.0;
  zl = compute_zeta_lambda(s);
  CHECK(zl.lambda(0, 1) == Approx(1.0).epsilon(1e-13));
  // no conditions
  VariationalState t = blank_state(0, 2);
  t.theta_star << 3, 1;
  zl = compute_zeta_lambda(t);
  CHECK(zl.zeta(0) == Approx(-1.0 / 3).epsilon(1e-13));
  CHECK(zl.zeta(1) == Approx(-1.8333333333).epsilon(1e-10));
}

TEST_CASE("u terms") {
  // Arithmetic of the observed form with given expectations.
  CHECK(-12 + kLogH + 0.5 * 50 - 0.005 * 2500 == Approx(-0.418938533).epsilon(1e-9));

  const NIG p{45, 1.3, 4, 300};
  const auto eta_local = GaussianNatural<double>::from_moments(52.0, 64.0);
  const double e1 = p.u * p.alpha / p.beta, e2 = -0.5 * p.alpha / p.beta;
  CHECK(u_term(p, CensorMark::Observed, 50.0, eta_local) ==
        Approx(oracle_elg(p) + kLogH + e1 * 50 + e2 * 2500).epsilon(1e-12));
  const double untrunc = oracle_elg(p) + kLogH + e1 * 52 + e2 * (52 * 52 + 64);
  CHECK(u_term(p, CensorMark::Incomplete, -1e6, eta_local) == Approx(untrunc).epsilon(1e-12));
  CHECK(u_term(p, CensorMark::Unreliable, 1e6, eta_local) == Approx(untrunc).epsilon(1e-12));
  const auto q = oracle::truncated_moments_quadrature(52, 8, 45, false);
  CHECK(u_term(p, CensorMark::Unreliable, 45.0, eta_local) ==
        Approx(oracle_elg(p) + kLogH + e1 * q.first + e2 * q.second).epsilon(1e-10));
}

TEST_CASE("responsibilities") {
  SUBCASE("single cluster") {
    Dataset ds;
    ds.conditions = fixture::conditions(2);
    ds.individuals.push_back(fixture::person("a", 2, 20, 50, false, {{0, 30.0}}));
    const auto e = ActiveEntries::build(ds);
    auto s = initialize_state(e, PriorSpec{}.build(2, 1), 3);
    iterate(e, PriorSpec{}.build(2, 1), s);
    CHECK(s.resp(0, 0) == 1.0);
  }
  SUBCASE("identical clusters split evenly") {
    const Dataset ds = separated(20, 4);
    const auto e = ActiveEntries::build(ds);
    auto s = initialize_state(e, PriorSpec{}.build(6, 2), 3);
    const auto zl = compute_zeta_lambda(s);
    const auto terms = compute_expected_terms(s);
    update_responsibilities(e, s, zl, terms, latent_moments(e, s));
    for (Eigen::Index n = 0; n < s.resp.rows(); ++n) {
      CHECK(s.resp(n, 0) == Approx(0.5).epsilon(1e-14));
      CHECK(s.resp(n, 1) == Approx(0.5).epsilon(1e-14));
    }
  }
  SUBCASE("direct evaluation of the cluster scores") {
    // Observed at 30, Unreliable at baseline 25, Incomplete at 50.
    Dataset ds;
    ds.conditions = fixture::conditions(3);
    ds.individuals.push_back(fixture::person("a", 3, 25, 50, false, {{0, 30.0}, {1, 10.0}}));
    const auto e = ActiveEntries::build(ds);
    auto s = blank_state(3, 2, 1);
    s.theta_star << 4.0, 2.5;
    s.a_star << 8, 1, 2, 3, 4, 1;
    s.b_star << 1, 2, 3, 9, 1, 2;
    set_nig(s, 0, 0, {30, 5, 6, 200});
    set_nig(s, 0, 1, {70, 5, 6, 200});
    set_nig(s, 1, 0, {20, 2, 3, 150});
    set_nig(s, 1, 1, {40, 1, 4, 300});
    set_nig(s, 2, 0, {60, 3, 5, 500});
    set_nig(s, 2, 1, {55, 0.5, 2.5, 90});
    s.pi_local = {0.0, 0.35};  // unreliable entry, then incomplete
    s.eta_local = {GaussianNatural<double>::from_moments(22, 30), GaussianNatural<double>::from_moments(58, 70)};
    REQUIRE(e.n_latent == 2);

    const auto mu = oracle::truncated_moments_quadrature(22, std::sqrt(30.0), 25, false);
    const auto mi = oracle::truncated_moments_quadrature(58, std::sqrt(70.0), 50, true);
    double c[2];
    for (int k = 0; k < 2; ++k) {
      double z = bdigamma(s.theta_star(k)) - bdigamma(s.theta_star.sum());
      for (int m = 0; m < 3; ++m) z += bdigamma(s.b_star(m, k)) - bdigamma(s.a_star(m, k) + s.b_star(m, k));
      auto part = [&](int m, double w, double t1, double t2) {
        const NIG p = s.nig(m, k);
        const double lam = bdigamma(s.a_star(m, k)) - bdigamma(s.b_star(m, k));
        return w * (lam + oracle_elg(p) + kLogH + p.u * p.alpha / p.beta * t1 - 0.5 * p.alpha / p.beta * t2);
      };
      c[k] = z + part(0, 1.0, 30, 900) + part(1, 1.0, mu.first, mu.second) + part(2, 0.35, mi.first, mi.second);
    }
    const double r0 = 1.0 / (1.0 + std::exp(c[1] - c[0]));
    update_responsibilities(e, s, compute_zeta_lambda(s), compute_expected_terms(s), latent_moments(e, s));
    CHECK(s.resp(0, 0) == Approx(r0).epsilon(1e-9));
    CHECK(s.resp(0, 0) + s.resp(0, 1) == Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("large scores do not overflow") {
    Dataset ds;
    ds.conditions = fixture::conditions(1);
    ds.individuals.push_back(fixture::person("a", 1, 20, 50, true, {{0, 30.0}}));
    const auto e = ActiveEntries::build(ds);
    auto s = blank_state(1, 2, 1);
    set_nig(s, 0, 0, {30, 1e6, 1e6, 1e6 * 0.01});
    const auto zl = compute_zeta_lambda(s);
    const auto terms = compute_expected_terms(s);
    update_responsibilities(e, s, zl, terms, latent_moments(e, s));
    CHECK(std::isfinite(s.resp(0, 0)));
    CHECK(s.resp(0, 0) > 0.99);
  }
}

TEST_CASE("latent updates") {
  Dataset ds;
  ds.conditions = fixture::conditions(2);
  // condition 0 incomplete at 60, condition 1 unreliable at 40
  ds.individuals.push_back(fixture::person("a", 2, 40, 60, false, {{1, 30.0}}));
  const auto e = ActiveEntries::build(ds);
  auto s = blank_state(2, 2, 1);
  s.resp << 0.3, 0.7;
  set_nig(s, 0, 0, {50, 1, 2, 100});  // E(eta) = (1, -0.01)
  set_nig(s, 0, 1, {50, 1, 2, 50});   // E(eta) = (2, -0.02)
  set_nig(s, 1, 0, {50, 1, 2, 100});
  set_nig(s, 1, 1, {50, 1, 2, 50});
  s.pi_local = {0.5, 0.5};
  s.eta_local = {GaussianNatural<double>::from_moments(50, 50), GaussianNatural<double>::from_moments(50, 50)};
  const auto zl = compute_zeta_lambda(s);
  const auto terms = compute_expected_terms(s);

  SUBCASE("convex combination of expected naturals") {
    update_unreliable_latents(e, s, terms);
    CHECK(s.eta_local[1].eta1 == Approx(1.7).epsilon(1e-14));
    CHECK(s.eta_local[1].eta2 == Approx(-0.017).epsilon(1e-14));
    CHECK(s.eta_local[0].eta1 == 1.0);  // untouched
    update_incomplete_latents(e, s, zl, terms);
    CHECK(s.eta_local[0].eta1 == Approx(1.7).epsilon(1e-14));
    CHECK(s.eta_local[0].eta2 == Approx(-0.017).epsilon(1e-14));
  }
  SUBCASE("literal presence update is the logistic of the summed u-terms") {
    update_incomplete_latents(e, s, zl, terms, PiUpdate::Literal);
    const auto eta = s.eta_local[0];
    const auto mom = oracle::truncated_moments_quadrature(eta.mean(), eta.sd(), 60, true);
    double x = 0;
    for (int k = 0; k < 2; ++k) {
      const NIG p = s.nig(0, k);
      const double lam = bdigamma(s.a_star(0, k)) - bdigamma(s.b_star(0, k));
      x += s.resp(0, k) *
           (lam + oracle_elg(p) + kLogH + p.u * p.alpha / p.beta * mom.first - 0.5 * p.alpha / p.beta * mom.second);
    }
    CHECK(s.pi_local[0] == Approx(1.0 / (1.0 + std::exp(-x))).epsilon(1e-9));
    // logistic identities
    const Eigen::RowVectorXd g1 = Eigen::RowVectorXd::Ones(1);
    ZetaLambda z1{VectorX::Zero(1), RowMatrixX::Constant(1, 1, std::log(3.0))};
    ExpectedTerms t0{RowMatrixX::Constant(1, 1, -kLogH), RowMatrixX::Zero(1, 1), RowMatrixX::Zero(1, 1)};
    const double lo = incomplete_log_odds(g1, 0, 0.0, eta, z1, t0, PiUpdate::Literal);
    CHECK(lo == Approx(std::log(3.0)).epsilon(1e-14));
    CHECK(1.0 / (1.0 + std::exp(-lo)) == Approx(0.75).epsilon(1e-14));
  }
  SUBCASE("exact presence update matches the mean-field log odds") {
    update_incomplete_latents(e, s, zl, terms, PiUpdate::Exact);
    const auto eta = s.eta_local[0];
    double x = 0;
    for (int k = 0; k < 2; ++k)
      x += s.resp(0, k) * (bdigamma(s.a_star(0, k)) - bdigamma(s.b_star(0, k)) + oracle_elg(s.nig(0, k)));
    const boost::math::normal_distribution<double> nd(eta.mean(), eta.sd());
    const double log_g_eta = -0.5 * eta.mean() * eta.mean() / eta.variance() - 0.5 * std::log(eta.variance());
    x += -log_g_eta + std::log(boost::math::cdf(boost::math::complement(nd, 60.0)));
    CHECK(s.pi_local[0] == Approx(1.0 / (1.0 + std::exp(-x))).epsilon(1e-10));
  }
}

TEST_CASE("accumulated statistics") {
  SUBCASE("observed toy with hard responsibilities") {
    Dataset ds;
    ds.conditions = fixture::conditions(1);
    ds.individuals.push_back(fixture::person("a", 1, 20, 80, true, {{0, 40.0}}));
    ds.individuals.push_back(fixture::person("b", 1, 20, 80, true, {{0, 60.0}}));
    const auto e = ActiveEntries::build(ds);
    auto s = blank_state(1, 2, 2);
    s.resp << 1, 0, 0, 1;
    const auto st = accumulate_statistics(e, s, latent_moments(e, s));
    CHECK(st.z_bar(0) == 1.0);
    CHECK(st.z_bar(1) == 1.0);
    CHECK(st.n_bar(0, 0) == 1.0);
    CHECK(st.n_bar(0, 1) == 1.0);
    CHECK(st.t1_bar(0, 0) == 40.0);
    CHECK(st.t2_bar(0, 0) == 1600.0);
    CHECK(st.t1_bar(0, 1) == 60.0);
    CHECK(st.t2_bar(0, 1) == 3600.0);
  }
  SUBCASE("zero-weight incomplete entry and unreliable moments") {
    Dataset ds;
    ds.conditions = fixture::conditions(2);
    ds.individuals.push_back(fixture::person("a", 2, 45, 70, false, {{1, 30.0}}));
    const auto e = ActiveEntries::build(ds);
    auto s = blank_state(2, 1, 1);
    s.pi_local = {0.0, 0.0};
    s.eta_local = {GaussianNatural<double>::from_moments(50, 64), GaussianNatural<double>::from_moments(50, 64)};
    const auto st = accumulate_statistics(e, s, latent_moments(e, s));
    CHECK(st.n_bar(0, 0) == 0.0);
    CHECK(st.t1_bar(0, 0) == 0.0);
    CHECK(st.n_bar(1, 0) == 1.0);
    CHECK(st.t1_bar(1, 0) == Approx(40.129960235836).epsilon(1e-12));
    CHECK(st.t2_bar(1, 0) == Approx(1626.346222404374).epsilon(1e-12));
  }
}

TEST_CASE("global update") {
  SUBCASE("no evidence leaves the prior") {
    const auto h = PriorSpec{}.build(2, 3);
    auto s = blank_state(2, 3);
    update_global(h, {VectorX::Zero(3), MatrixX::Zero(2, 3), MatrixX::Zero(2, 3), MatrixX::Zero(2, 3)}, s);
    CHECK(s.theta_star == h.theta);
    CHECK(s.a_star == h.a);
    CHECK(s.b_star == h.b);
    CHECK(s.u_star == h.u);
    CHECK(s.beta_star == h.beta);
  }
  SUBCASE("conjugate example and an empty cluster") {
    const auto h = PriorSpec{}.build(1, 2);
    auto s = blank_state(1, 2);
    Intermediates st{VectorX{{2.0, 0.0}}, MatrixX{{2.0, 0.0}}, MatrixX{{100.0, 0.0}}, MatrixX{{5200.0, 0.0}}};
    update_global(h, st, s);
    CHECK(s.a_star(0, 0) == 3.0);
    CHECK(s.b_star(0, 0) == 1.0);
    CHECK(s.u_star(0, 0) == Approx(50).epsilon(1e-14));
    CHECK(s.v_star(0, 0) == Approx(2.3).epsilon(1e-14));
    CHECK(s.alpha_star(0, 0) == 6.0);
    CHECK(s.beta_star(0, 0) == Approx(850).epsilon(1e-13));
    CHECK(s.nig(0, 1) == h.nig(0, 1));
    CHECK(s.a_star(0, 1) == 1.0);
    CHECK(s.b_star(0, 1) == 1.0);
  }
  SUBCASE("inconsistent accumulators are reported") {
    const auto h = PriorSpec{}.build(1, 1);
    auto s = blank_state(1, 1);
    Intermediates st{VectorX{{1.0}}, MatrixX{{1.5}}, MatrixX{{60.0}}, MatrixX{{3600.0}}};
    CHECK_THROWS_AS(update_global(h, st, s), std::runtime_error);
    st.n_bar(0, 0) = 1.0 + 1e-9;
    CHECK_NOTHROW(update_global(h, st, s));
    CHECK(s.b_star(0, 0) == 1.0);
  }
}

TEST_CASE("initialization") {
  const Dataset ds = separated(300, 9);
  const auto e = ActiveEntries::build(ds);
  const auto h = PriorSpec{}.build(6, 4);
  const auto a = initialize_state(e, h, 42);
  const auto b = initialize_state(e, h, 42);
  CHECK(a.resp == b.resp);
  CHECK(initialize_state(e, h, 43).resp != a.resp);
  for (Eigen::Index n = 0; n < a.resp.rows(); ++n) CHECK(std::abs(a.resp.row(n).sum() - 1.0) <= 1e-12);
  CHECK(std::all_of(a.pi_local.begin(), a.pi_local.end(), [](double p) { return p == 0.5; }));
  const auto one = initialize_state(e, PriorSpec{}.build(6, 1), 42);
  CHECK((one.resp.array() == 1.0).all());
  const auto pe = expected_natural(PriorSpec{}.nig);
  CHECK(one.eta_local[0].eta1 == Approx(pe.eta1).epsilon(1e-15));
  CHECK_THROWS_AS(initialize_state(e, PriorSpec{}.build(6, 0), 1), std::domain_error);
}

TEST_CASE("fit reaches the conjugate posterior for one cluster without censoring") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> onset(55, 9);
  std::uniform_real_distribution<double> coin(0, 1);
  Dataset ds;
  ds.conditions = fixture::conditions(3);
  std::vector<std::vector<double>> ts(3);
  std::vector<int> present(3, 0);
  for (int i = 0; i < 400; ++i) {
    std::map<std::size_t, double> on;
    for (std::size_t m = 0; m < 3; ++m)
      if (coin(rng) < 0.3 + 0.2 * static_cast<double>(m)) {
        on[m] = onset(rng);
        ts[m].push_back(on[m]);
        ++present[m];
      }
    ds.individuals.push_back(fixture::person("p" + std::to_string(i), 3, 0.0, 120.0, true, on));
  }
  const PriorSpec prior;
  FitOptions fo;
  fo.K = 1;
  const auto res = fit(ds, prior.build(3, 1), fo);
  CHECK(res.model.fit_meta.converged);
  CHECK(res.model.fit_meta.iterations <= 2);
  for (Eigen::Index m = 0; m < 3; ++m) {
    // closed form via sample mean and centred sum of squares
    const auto& x = ts[static_cast<std::size_t>(m)];
    const double n = static_cast<double>(x.size());
    const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0;
    for (double t : x) ss += (t - xbar) * (t - xbar);
    const NIG p0 = prior.nig;
    const double v = p0.v + n;
    const double u = (p0.v * p0.u + n * xbar) / v;
    const double beta = p0.beta + 0.5 * ss + 0.5 * n * p0.v * (xbar - p0.u) * (xbar - p0.u) / v;
    const NIG got = res.model.nig(m, 0);
    CHECK(std::abs(got.u - u) <= 1e-8 * std::abs(u));
    CHECK(std::abs(got.v - v) <= 1e-8 * v);
    CHECK(std::abs(got.alpha - (p0.alpha + n / 2)) <= 1e-8 * got.alpha);
    CHECK(std::abs(got.beta - beta) <= 1e-8 * beta);
    const double a = 1 + present[static_cast<std::size_t>(m)], b = 1 + (400 - present[static_cast<std::size_t>(m)]);
    CHECK(res.model.pi_bar(m, 0) == Approx(a / (a + b)).epsilon(1e-12));
  }
  CHECK(res.model.theta_bar(0) == 1.0);
}

TEST_CASE("fit separates two disjoint clusters") {
  const Dataset ds = separated(200, 5);
  FitOptions fo;
  fo.K = 2;
  fo.seed = 3;
  const auto res = fit(ds, PriorSpec{}.build(6, 2), fo);
  CHECK(res.model.fit_meta.converged);
  std::vector<int> labels;
  for (std::size_t i = 0; i < ds.N(); ++i) labels.push_back(static_cast<int>(i % 2));
  CHECK(cluster_recovery(labels, res.state.resp) == 1.0);
}

TEST_CASE("per-iteration invariants on censored data") {
  const Dataset ds = separated(150, 12);
  const auto e = ActiveEntries::build(ds);
  const auto h = PriorSpec{}.build(6, 3);
  auto s = initialize_state(e, h, 8);
  for (int it = 0; it < 25; ++it) {
    Intermediates st;
    iterate(e, h, s, 1, &st);
    CHECK(std::abs(st.z_bar.sum() - static_cast<double>(ds.N())) <= 1e-9);
    CHECK(((st.n_bar.array() - st.z_bar.transpose().replicate(6, 1).array()) <= 1e-9).all());
    for (Eigen::Index n = 0; n < s.resp.rows(); ++n) REQUIRE(std::abs(s.resp.row(n).sum() - 1.0) <= 1e-12);
    CHECK((s.a_star.array() > 0).all());
    CHECK((s.b_star.array() > 0).all());
    CHECK((s.v_star.array() > 0).all());
    CHECK((s.alpha_star.array() > 0).all());
    CHECK((s.beta_star.array() > 0).all());
    CHECK(std::all_of(s.pi_local.begin(), s.pi_local.end(), [](double p) { return p >= 0 && p <= 1; }));
  }
}

TEST_CASE("permuting cluster labels permutes the fit") {
  const Dataset ds = separated(100, 21);
  const auto e = ActiveEntries::build(ds);
  auto h = PriorSpec{}.build(6, 3);
  h.theta << 1.0, 2.0, 0.5;
  h.a(2, 1) = 3.0;
  h.u(0, 2) = 35.0;
  const std::vector<Eigen::Index> perm{2, 0, 1};  // new column j holds old column perm[j]
  auto permute_cols = [&](const auto& x) {
    std::decay_t<decltype(x)> y(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < 3; ++j) y.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
    return y;
  };
  Hyperparameters hp = h;
  hp.theta = VectorX{{h.theta(2), h.theta(0), h.theta(1)}};
  hp.a = permute_cols(h.a);
  hp.b = permute_cols(h.b);
  hp.u = permute_cols(h.u);
  hp.v = permute_cols(h.v);
  hp.alpha = permute_cols(h.alpha);
  hp.beta = permute_cols(h.beta);

  auto s = initialize_state(e, h, 5);
  auto sp = initialize_state(e, hp, 5);
  sp.resp = permute_cols(s.resp);
  sp.eta_local = s.eta_local;
  for (int it = 0; it < 15; ++it) {
    iterate(e, h, s);
    iterate(e, hp, sp);
  }
  // Sums over k run in a different order, so agreement is to rounding.
  auto close = [](const auto& x, const auto& y) {
    return (x - y).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, y.cwiseAbs().maxCoeff());
  };
  CHECK(close(sp.theta_star, VectorX{{s.theta_star(2), s.theta_star(0), s.theta_star(1)}}));
  CHECK(close(sp.a_star, permute_cols(s.a_star)));
  CHECK(close(sp.b_star, permute_cols(s.b_star)));
  CHECK(close(sp.u_star, permute_cols(s.u_star)));
  CHECK(close(sp.v_star, permute_cols(s.v_star)));
  CHECK(close(sp.alpha_star, permute_cols(s.alpha_star)));
  CHECK(close(sp.beta_star, permute_cols(s.beta_star)));
  CHECK(close(sp.resp, permute_cols(s.resp)));
}

TEST_CASE("fit is deterministic and independent of the thread count") {
  const Dataset ds = separated(700, 31);  // several reduction blocks
  FitOptions fo;
  fo.K = 3;
  fo.seed = 19;
  fo.max_iter = 40;
  fo.threads = 1;
  const auto a = fit(ds, PriorSpec{}.build(6, 3), fo);
  const auto b = fit(ds, PriorSpec{}.build(6, 3), fo);
  fo.threads = 3;
  const auto c = fit(ds, PriorSpec{}.build(6, 3), fo);
  for (const auto* r : {&b, &c}) {
    CHECK(r->trace == a.trace);
    CHECK(r->model.theta_bar == a.model.theta_bar);
    CHECK(r->model.pi_bar == a.model.pi_bar);
    CHECK(r->model.u == a.model.u);
    CHECK(r->model.v == a.model.v);
    CHECK(r->model.alpha == a.model.alpha);
    CHECK(r->model.beta == a.model.beta);
    CHECK(r->state.resp == a.state.resp);
  }
}

TEST_CASE("fit options and errors") {
  const Dataset ds = separated(30, 2);
  const PriorSpec prior;
  FitOptions fo;
  fo.K = 2;
  fo.max_iter = 0;
  auto res = fit(ds, prior.build(6, 2), fo);
  CHECK(!res.model.fit_meta.converged);
  CHECK(res.model.fit_meta.iterations == 0);
  CHECK(res.trace.empty());
  CHECK(res.model.u == prior.build(6, 2).u);
  CHECK(res.model.pi_bar.isApprox(MatrixX::Constant(6, 2, 0.5)));
  CHECK(res.model.fit_meta.epsilon == Approx(1e-4 * std::sqrt(2.0 + 6 * 6 * 2)));
  CHECK(global_parameter_count(6, 2) == 74);

  fo.max_iter = 3;
  fo.epsilon = 1e-300;
  res = fit(ds, prior.build(6, 2), fo);
  CHECK(res.trace.size() == 3);
  CHECK(!res.model.fit_meta.converged);

  Dataset bad = ds;
  bad.individuals[0].t[0] = -1;
  bad.individuals[0].kappa[0] = CensorMark::Unreliable;
  bad.individuals[0].d[0] = Presence::Present;
  CHECK_THROWS_AS(fit(bad, prior.build(6, 2), fo), std::invalid_argument);
  CHECK_THROWS_AS(fit(ds, prior.build(5, 2), fo), std::invalid_argument);
  fo.K = 0;
  CHECK_THROWS_AS(fit(ds, prior.build(6, 0), fo), std::domain_error);
}

TEST_CASE("the literal presence form is selectable") {
  const Dataset ds = separated(100, 6);
  FitOptions fo;
  fo.K = 2;
  fo.max_iter = 20;
  fo.pi_update = PiUpdate::Literal;
  const auto res = fit(ds, PriorSpec{}.build(6, 2), fo);
  CHECK(res.model.fit_meta.pi_update == PiUpdate::Literal);
  CHECK(res.trace.size() >= 1);
}
