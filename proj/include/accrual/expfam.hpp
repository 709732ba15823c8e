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

// Gaussian / Normal-Inverse-Gamma exponential-family kernels.

#ifndef ACCRUAL_EXPFAM_HPP
#define ACCRUAL_EXPFAM_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace accrual {

namespace detail {
using no_promote = boost::math::policies::policy<
    boost::math::policies::promote_float<false>,
    boost::math::policies::promote_double<false>>;
}

template <typename Scalar>
inline constexpr Scalar kLogSqrt2Pi =
    Scalar(0.918938533204672741780329736405617639861397473637783412817);

// log h(t) for the Gaussian family.
template <typename Scalar>
constexpr Scalar log_h() { return -kLogSqrt2Pi<Scalar>; }

template <typename Scalar>
Scalar digamma(Scalar x) {
  if (!(x > Scalar(0))) throw std::domain_error("digamma: argument must be > 0");
  Scalar acc(0);
  while (x < Scalar(10)) {
    acc -= Scalar(1) / x;
    x += Scalar(1);
  }
  const Scalar r = Scalar(1) / (x * x);
  // Bernoulli tail, Horner form
  const Scalar series =
      r * (Scalar(1) / 12 -
           r * (Scalar(1) / 120 -
                r * (Scalar(1) / 252 -
                     r * (Scalar(1) / 240 -
                          r * (Scalar(1) / 132 -
                               r * (Scalar(691) / 32760 - r * (Scalar(1) / 12)))))));
  return acc + std::log(x) - Scalar(0.5) / x - series;
}

template <typename Scalar>
struct GaussianNatural {
  Scalar eta1{0};
  Scalar eta2{-0.5};

  static GaussianNatural from_moments(Scalar mean, Scalar var) {
    return {mean / var, Scalar(-0.5) / var};
  }
  Scalar variance() const { return Scalar(-0.5) / eta2; }
  Scalar mean() const { return eta1 * variance(); }
  Scalar sd() const { return std::sqrt(variance()); }
  bool valid() const { return eta2 < Scalar(0) && std::isfinite(eta1) && std::isfinite(eta2); }
};

template <typename Scalar>
struct NIGParams {
  Scalar u{0};
  Scalar v{1};
  Scalar alpha{1};
  Scalar beta{1};

  bool valid() const {
    return std::isfinite(u) && v > Scalar(0) && alpha > Scalar(0) && beta > Scalar(0) &&
           std::isfinite(v) && std::isfinite(alpha) && std::isfinite(beta);
  }
  bool operator==(const NIGParams&) const = default;
};

template <typename Scalar>
struct SuffStats {
  Scalar t1{0};
  Scalar t2{0};
  Scalar n{0};

  void add(Scalar w, Scalar e_t, Scalar e_t2) {
    t1 += w * e_t;
    t2 += w * e_t2;
    n += w;
  }
};

// Conjugate update of an NIG prior by weighted sufficient statistics.
template <typename Scalar>
NIGParams<Scalar> nig_update(const NIGParams<Scalar>& p, const SuffStats<Scalar>& s) {
  NIGParams<Scalar> q;
  q.v = p.v + s.n;
  q.u = (p.v * p.u + s.t1) / q.v;
  q.alpha = p.alpha + s.n / 2;
  q.beta = p.beta + Scalar(0.5) * (s.t2 + p.v * p.u * p.u - q.v * q.u * q.u);
  return q;
}

template <typename Scalar>
struct NIGExpectations {
  Scalar e_log_inv_var;
  Scalar e_inv_var;
  Scalar e_mu_over_var;
  Scalar e_mu2_over_var;
};

template <typename Scalar>
NIGExpectations<Scalar> nig_expectations(const NIGParams<Scalar>& p) {
  const Scalar ratio = p.alpha / p.beta;
  return {digamma(p.alpha) - std::log(p.beta), ratio, p.u * ratio,
          p.u * p.u * ratio + Scalar(1) / p.v};
}

// E[log g(eta)] with log g = -mu^2/(2 sigma^2) - log sigma.
template <typename Scalar>
Scalar expected_log_g(const NIGParams<Scalar>& p) {
  const auto e = nig_expectations(p);
  return Scalar(-0.5) * e.e_mu2_over_var + Scalar(0.5) * e.e_log_inv_var;
}

template <typename Scalar>
GaussianNatural<Scalar> expected_natural(const NIGParams<Scalar>& p) {
  const Scalar ratio = p.alpha / p.beta;
  return {p.u * ratio, Scalar(-0.5) * ratio};
}

// log g evaluated at a point natural parameter.
template <typename Scalar>
Scalar log_g(const GaussianNatural<Scalar>& eta) {
  return eta.eta1 * eta.eta1 / (Scalar(4) * eta.eta2) + Scalar(0.5) * std::log(Scalar(-2) * eta.eta2);
}

enum class TruncKind { None, LeftOf, RightOf };

// LeftOf(b): support restricted to t > b.  RightOf(b): t < b.
template <typename Scalar>
struct TruncSide {
  TruncKind side{TruncKind::None};
  Scalar bound{0};

  static TruncSide none() { return {}; }
  static TruncSide left_of(Scalar b) { return {TruncKind::LeftOf, b}; }
  static TruncSide right_of(Scalar b) { return {TruncKind::RightOf, b}; }
};

template <typename Scalar>
struct TruncMoments {
  Scalar e_t;
  Scalar e_t2;
};

// Standard-normal hazard phi(a)/S(a) and the scaled conditional variance
// of Z given Z > a.
template <typename Scalar>
struct UpperTail {
  Scalar hazard;
  Scalar var_ratio;
};

template <typename Scalar>
UpperTail<Scalar> upper_tail(Scalar a) {
  using std::numbers::sqrt2_v;
  if (a <= Scalar(8)) {
    const Scalar surv = Scalar(0.5) * std::erfc(a / sqrt2_v<Scalar>);
    const Scalar pdf = std::exp(Scalar(-0.5) * a * a - kLogSqrt2Pi<Scalar>);
    const Scalar lam = pdf / surv;
    Scalar var = Scalar(1) + a * lam - lam * lam;
    return {lam, var};
  }
  // r = hazard - a = 1/(a + 2/(a + 3/(a + ...))), evaluated backwards.
  Scalar t = a;
  for (int j = 80; j >= 2; --j) t = a + Scalar(j) / t;
  const Scalar r = Scalar(1) / t;
  return {a + r, Scalar(1) - a * r - r * r};
}

template <typename Scalar>
TruncMoments<Scalar> truncated_normal_moments(Scalar mean, Scalar sd, TruncSide<Scalar> trunc) {
  if (!(sd > Scalar(0))) throw std::domain_error("truncated_normal_moments: sd must be > 0");
  if (trunc.side == TruncKind::None) return {mean, mean * mean + sd * sd};
  const Scalar a = (trunc.bound - mean) / sd;
  const Scalar sign = trunc.side == TruncKind::LeftOf ? Scalar(1) : Scalar(-1);
  const auto tail = upper_tail(sign * a);
  const Scalar e_t = mean + sign * sd * tail.hazard;
  Scalar var_ratio = tail.var_ratio;
  constexpr Scalar floor = std::numeric_limits<Scalar>::epsilon() * std::numeric_limits<Scalar>::epsilon();
  if (!(var_ratio > floor)) var_ratio = floor;
  if (var_ratio > Scalar(1)) var_ratio = Scalar(1);
  return {e_t, sd * sd * var_ratio + e_t * e_t};
}

// Standard normal log survival log S(a), stable in both tails.
template <typename Scalar>
Scalar log_normal_survival(Scalar a) {
  using std::numbers::sqrt2_v;
  if (a <= Scalar(8)) return std::log(Scalar(0.5) * std::erfc(a / sqrt2_v<Scalar>));
  const auto tail = upper_tail(a);
  return Scalar(-0.5) * a * a - kLogSqrt2Pi<Scalar> - std::log(tail.hazard);
}

// Posterior predictive of the NIG-Gaussian pair: Student-t(2 alpha, u,
// beta (v + 1) / (alpha v)).
template <typename Scalar>
struct StudentT {
  Scalar df{1};
  Scalar loc{0};
  Scalar scale{1};
  Scalar log_norm{0};

  StudentT() = default;
  StudentT(Scalar df_, Scalar loc_, Scalar scale_) : df(df_), loc(loc_), scale(scale_) {
    using std::lgamma;
    log_norm = lgamma((df + 1) / 2) - lgamma(df / 2) -
               Scalar(0.5) * std::log(df * std::numbers::pi_v<Scalar>) - std::log(scale);
  }

  Scalar log_pdf(Scalar t) const {
    const Scalar z = (t - loc) / scale;
    return log_norm - (df + 1) / 2 * std::log1p(z * z / df);
  }
  Scalar pdf(Scalar t) const { return std::exp(log_pdf(t)); }

  // P(T > |z|) for the standard variate.
  Scalar upper_tail_prob(Scalar z) const {
    const Scalar z2 = z * z;
    if (z2 < df)
      return Scalar(0.5) * boost::math::ibetac(Scalar(0.5), df / 2, z2 / (df + z2), detail::no_promote());
    return Scalar(0.5) * boost::math::ibeta(df / 2, Scalar(0.5), df / (df + z2), detail::no_promote());
  }

  Scalar cdf(Scalar t) const {
    const Scalar z = (t - loc) / scale;
    if (z == Scalar(0)) return Scalar(0.5);
    if (std::isinf(z)) return z > 0 ? Scalar(1) : Scalar(0);
    const Scalar tail = upper_tail_prob(z);
    return z < 0 ? tail : Scalar(1) - tail;
  }
  Scalar survival(Scalar t) const {
    const Scalar z = (t - loc) / scale;
    if (z == Scalar(0)) return Scalar(0.5);
    if (std::isinf(z)) return z > 0 ? Scalar(0) : Scalar(1);
    const Scalar tail = upper_tail_prob(z);
    return z > 0 ? tail : Scalar(1) - tail;
  }
  Scalar log_cdf(Scalar t) const {
    const Scalar z = (t - loc) / scale;
    if (z == Scalar(0)) return -std::numbers::ln2_v<Scalar>;
    const Scalar tail = upper_tail_prob(z);
    return z < 0 ? std::log(tail) : std::log1p(-tail);
  }
  Scalar log_survival(Scalar t) const {
    const Scalar z = (t - loc) / scale;
    if (z == Scalar(0)) return -std::numbers::ln2_v<Scalar>;
    const Scalar tail = upper_tail_prob(z);
    return z > 0 ? std::log(tail) : std::log1p(-tail);
  }

  // Integral of t f(t) over (lo, hi]; needs df > 1.
  Scalar partial_mean(Scalar lo, Scalar hi) const {
    if (!(df > Scalar(1))) throw std::domain_error("StudentT::partial_mean: df must be > 1");
    auto edge = [&](Scalar t) -> Scalar {
      if (std::isinf(t)) return Scalar(0);
      const Scalar z = (t - loc) / scale;
      return (df + z * z) * std::exp(log_pdf(t) + std::log(scale));
    };
    return loc * (cdf(hi) - cdf(lo)) + scale * (edge(lo) - edge(hi)) / (df - 1);
  }

  Scalar mode() const { return loc; }
};

template <typename Scalar>
StudentT<Scalar> predictive(const NIGParams<Scalar>& p) {
  return StudentT<Scalar>(2 * p.alpha, p.u,
                          std::sqrt(p.beta * (p.v + 1) / (p.alpha * p.v)));
}

template <typename Scalar>
Scalar predictive_density(const NIGParams<Scalar>& p, Scalar t) { return predictive(p).pdf(t); }

template <typename Scalar>
Scalar predictive_cdf(const NIGParams<Scalar>& p, Scalar t) { return predictive(p).cdf(t); }

template <typename Scalar>
Scalar predictive_survival(const NIGParams<Scalar>& p, Scalar t) { return predictive(p).survival(t); }

// log of the NIG normaliser sqrt(2 pi) Gamma(alpha) / (sqrt(v) beta^alpha).
template <typename Scalar>
Scalar nig_log_normalizer(const NIGParams<Scalar>& p) {
  using std::lgamma;
  return kLogSqrt2Pi<Scalar> + lgamma(p.alpha) - Scalar(0.5) * std::log(p.v) -
         p.alpha * std::log(p.beta);
}

// Predictive density as h(t) Z(prior) ratio; kept for cross-checks.
template <typename Scalar>
Scalar predictive_density_ratio(const NIGParams<Scalar>& p, Scalar t) {
  const auto post = nig_update(p, SuffStats<Scalar>{t, t * t, Scalar(1)});
  return std::exp(log_h<Scalar>() + nig_log_normalizer(post) - nig_log_normalizer(p));
}

}  // namespace accrual

#endif  // ACCRUAL_EXPFAM_HPP
