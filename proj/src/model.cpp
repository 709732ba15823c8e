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

#include "accrual/model.hpp"

#include <stdexcept>
#include <unordered_set>

namespace accrual {

bool sex_excluded(const ConditionMeta& c, Sex sex) {
  return c.sex_specific == SexSpecific::MaleOnly && sex == Sex::Female;
}

bool known_absent_exempt(const ConditionMeta& c, Sex sex, double tau) {
  return sex_excluded(c, sex) || (c.lifelong && tau > 0);
}

std::vector<Violation> validate_dataset(const Dataset& ds) {
  std::vector<Violation> out;
  const std::size_t M = ds.M();
  std::unordered_set<std::string> codes;
  for (const auto& c : ds.conditions)
    if (!codes.insert(c.code).second) out.push_back({"", c.code, "duplicate condition code"});

  std::unordered_set<std::string> ids;
  for (const auto& p : ds.individuals) {
    auto bad = [&](const std::string& cond, const std::string& rule) {
      out.push_back({p.id, cond, rule});
    };
    if (!ids.insert(p.id).second) bad("", "duplicate individual id");
    if (p.d.size() != M || p.t.size() != M || p.kappa.size() != M) {
      bad("", "trajectory vectors must have length M");
      continue;
    }
    if (!(p.rho >= 0) || !(p.rho <= p.tau) || !std::isfinite(p.tau))
      bad("", "requires 0 <= baseline age <= extraction age");

    for (std::size_t m = 0; m < M; ++m) {
      const auto& c = ds.conditions[m];
      const double t = p.t[m];
      switch (p.kappa[m]) {
        case CensorMark::Observed:
          if (p.d[m] == Presence::Present) {
            if (!(t > p.rho && t <= p.tau))
              bad(c.code, "observed onset must lie in (baseline, extraction]");
            if (sex_excluded(c, p.sex)) bad(c.code, "sex-specific condition must be absent");
          } else if (p.d[m] == Presence::Absent) {
            if (p.iota != Vital::Dead && !known_absent_exempt(c, p.sex, p.tau))
              bad(c.code, "observed absence requires a dead individual");
            if (!std::isnan(t)) bad(c.code, "observed absence carries no onset age");
          } else {
            bad(c.code, "observed mark requires known presence");
          }
          break;
        case CensorMark::Unreliable:
          if (p.d[m] != Presence::Present) bad(c.code, "unreliable mark requires presence");
          if (!(t == p.rho)) bad(c.code, "unreliable onset must equal baseline age");
          if (sex_excluded(c, p.sex)) bad(c.code, "sex-specific condition must be absent");
          break;
        case CensorMark::Incomplete:
          if (p.iota != Vital::Alive) bad(c.code, "incomplete mark requires a living individual");
          if (p.d[m] != Presence::Unknown) bad(c.code, "incomplete mark requires unknown presence");
          if (!(t == p.tau)) bad(c.code, "incomplete onset must equal extraction age");
          if (known_absent_exempt(c, p.sex, p.tau))
            bad(c.code, "sex-specific or lifelong condition must be observed");
          break;
      }
    }
  }
  return out;
}

bool Hyperparameters::valid() const {
  const auto K = theta.size();
  const auto M = a.rows();
  auto shape_ok = [&](const MatrixX& x) { return x.rows() == M && x.cols() == K; };
  if (K < 1 || !shape_ok(a) || !shape_ok(b) || !shape_ok(u) || !shape_ok(v) || !shape_ok(alpha) ||
      !shape_ok(beta))
    return false;
  if ((theta.array() <= 0).any() || (a.array() <= 0).any() || (b.array() <= 0).any()) return false;
  for (Eigen::Index m = 0; m < M; ++m)
    for (Eigen::Index k = 0; k < K; ++k)
      if (!nig(m, k).valid()) return false;
  return true;
}

Hyperparameters Hyperparameters::uniform(std::size_t M, std::size_t K, double theta, double a,
                                         double b, const NIG& nig) {
  const auto m = static_cast<Eigen::Index>(M);
  const auto k = static_cast<Eigen::Index>(K);
  Hyperparameters h;
  h.theta = VectorX::Constant(k, theta);
  h.a = MatrixX::Constant(m, k, a);
  h.b = MatrixX::Constant(m, k, b);
  h.u = MatrixX::Constant(m, k, nig.u);
  h.v = MatrixX::Constant(m, k, nig.v);
  h.alpha = MatrixX::Constant(m, k, nig.alpha);
  h.beta = MatrixX::Constant(m, k, nig.beta);
  return h;
}

ActiveEntries ActiveEntries::build(const Dataset& ds) {
  ActiveEntries e;
  const std::size_t M = ds.M();
  if (M > 0xffff) throw std::invalid_argument("too many conditions");
  e.offset.reserve(ds.N() + 1);
  e.offset.push_back(0);
  for (const auto& p : ds.individuals) {
    for (std::size_t m = 0; m < M; ++m) {
      const auto kappa = p.kappa[m];
      std::uint8_t kind;
      if (kappa == CensorMark::Observed) {
        if (p.d[m] != Presence::Present) continue;
        kind = EntryKind::Observed;
      } else {
        kind = kappa == CensorMark::Unreliable ? EntryKind::Unreliable : EntryKind::Incomplete;
      }
      e.m.push_back(static_cast<std::uint16_t>(m));
      e.kind.push_back(kind);
      e.t.push_back(kappa == CensorMark::Incomplete ? p.tau : p.t[m]);
      e.local.push_back(kind == EntryKind::Observed ? npos : static_cast<std::uint32_t>(e.n_latent++));
    }
    e.offset.push_back(e.m.size());
  }
  return e;
}

FittedModel FittedModel::from_state(const VariationalState& s, std::vector<ConditionMeta> conditions,
                                    FitMeta meta) {
  FittedModel f;
  f.K = s.K();
  f.theta_bar = s.theta_star / s.theta_star.sum();
  f.pi_bar = (s.a_star.array() / (s.a_star.array() + s.b_star.array())).matrix();
  f.u = s.u_star;
  f.v = s.v_star;
  f.alpha = s.alpha_star;
  f.beta = s.beta_star;
  f.conditions = std::move(conditions);
  f.fit_meta = std::move(meta);
  return f;
}

}  // namespace accrual
