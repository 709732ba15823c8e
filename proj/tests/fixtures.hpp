// Copyright 2026 The accrual Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef ACCRUAL_TESTS_FIXTURES_HPP
#define ACCRUAL_TESTS_FIXTURES_HPP

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <unistd.h>

#include "accrual/model.hpp"

namespace fixture {

inline std::vector<accrual::ConditionMeta> conditions(std::size_t M) {
  std::vector<accrual::ConditionMeta> c(M);
  for (std::size_t m = 0; m < M; ++m) {
    c[m].code = "X" + std::to_string(m);
    c[m].name = "cond " + std::to_string(m);
  }
  return c;
}

// Censor marks from onsets, without sex or lifelong rules.
inline accrual::Trajectory person(const std::string& id, std::size_t M, double rho, double tau, bool dead,
                                  const std::map<std::size_t, double>& onsets) {
  using namespace accrual;
  Trajectory p;
  p.id = id;
  p.rho = rho;
  p.tau = tau;
  p.iota = dead ? Vital::Dead : Vital::Alive;
  p.d.assign(M, Presence::Absent);
  p.t.assign(M, kNoAge);
  p.kappa.assign(M, CensorMark::Observed);
  for (std::size_t m = 0; m < M; ++m) {
    const auto it = onsets.find(m);
    if (it != onsets.end() && it->second <= tau) {
      p.d[m] = Presence::Present;
      if (it->second <= rho) {
        p.kappa[m] = CensorMark::Unreliable;
        p.t[m] = rho;
      } else {
        p.t[m] = it->second;
      }
    } else if (!dead) {
      p.d[m] = Presence::Unknown;
      p.kappa[m] = CensorMark::Incomplete;
      p.t[m] = tau;
    }
  }
  return p;
}

// Two clusters, three conditions, hand-set.
inline accrual::FittedModel toy_model() {
  using namespace accrual;
  FittedModel f;
  f.K = 2;
  f.conditions = conditions(3);
  f.theta_bar = VectorX{{0.6, 0.4}};
  f.pi_bar = MatrixX{{0.30, 0.05}, {0.10, 0.60}, {0.50, 0.50}};
  f.u = MatrixX{{50.0, 65.0}, {70.0, 55.0}, {40.0, 60.0}};
  f.v = MatrixX{{20.0, 5.0}, {8.0, 30.0}, {3.0, 12.0}};
  f.alpha = MatrixX{{12.0, 4.0}, {6.0, 25.0}, {2.5, 9.0}};
  f.beta = MatrixX{{800.0, 300.0}, {500.0, 1600.0}, {150.0, 700.0}};
  return f;
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "accrual-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture

#endif  // ACCRUAL_TESTS_FIXTURES_HPP
