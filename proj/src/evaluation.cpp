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

#include "accrual/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "accrual/parallel.hpp"

namespace accrual {

namespace {

constexpr std::uint64_t kEvalSalt = 0xe7a1;

struct Item {
  std::uint32_t m;
  int label;
  double score;
  double abs_err;  // NaN when no onset error applies
};

}  // namespace

std::vector<int> hungarian(const MatrixX& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(n);
  for (int j = 1; j <= n; ++j) assign[p[j] - 1] = j - 1;
  return assign;
}

std::vector<int> argmax_labels(const RowMatrixX& probs) {
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index n = 0; n < probs.rows(); ++n) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < probs.cols(); ++k)
      if (probs(n, k) > probs(n, best)) best = k;
    out[static_cast<std::size_t>(n)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> match_clusters(const std::vector<int>& true_labels, const RowMatrixX& probs) {
  const auto K = probs.cols();
  if (static_cast<std::size_t>(probs.rows()) != true_labels.size())
    throw std::invalid_argument("match_clusters: label count mismatch");
  const auto est = argmax_labels(probs);
  MatrixX counts = MatrixX::Zero(K, K);  // rows: estimated, cols: true
  for (std::size_t n = 0; n < est.size(); ++n) {
    if (true_labels[n] < 0 || true_labels[n] >= K) throw std::invalid_argument("match_clusters: label out of range");
    counts(est[n], true_labels[n]) += 1;
  }
  return hungarian(-counts);
}

double cluster_recovery(const std::vector<int>& true_labels, const RowMatrixX& probs) {
  if (true_labels.empty()) return 0.0;
  const auto perm = match_clusters(true_labels, probs);
  const auto est = argmax_labels(probs);
  std::size_t hit = 0;
  for (std::size_t n = 0; n < est.size(); ++n) hit += perm[est[n]] == true_labels[n];
  return static_cast<double>(hit) / static_cast<double>(est.size());
}

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q)
      if (labels[idx[q]]) {
        rank_sum += mid;
        ++pos;
      }
    i = j + 1;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  const double np = static_cast<double>(pos);
  return (rank_sum - np * (np + 1) / 2) / (np * static_cast<double>(neg));
}

const char* protocol_name(Protocol p) {
  return p == Protocol::UniformAge ? "uniform-age" : "last-10-years";
}

std::optional<Protocol> parse_protocol(const std::string& name) {
  if (name == "uniform-age") return Protocol::UniformAge;
  if (name == "last-10-years") return Protocol::LastYears;
  return std::nullopt;
}

EvalReport evaluate(const Forecaster& f, const Dataset& test, const EvalOptions& opt) {
  if (test.M() != f.M()) throw std::invalid_argument("evaluate: model and test data have different M");
  for (std::size_t m = 0; m < f.M(); ++m)
    if (test.conditions[m].code != f.model().conditions[m].code)
      throw std::invalid_argument("evaluate: condition codes differ from the model");
  const std::size_t N = test.N();
  const std::size_t M = f.M();
  const std::size_t nb = block_count(N);
  std::vector<std::vector<Item>> items(nb);
  std::vector<std::size_t> skipped(nb, 0), censored(nb, 0);

  parallel_blocks(N, opt.threads, [&](std::size_t b, std::size_t lo, std::size_t hi) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto& out = items[b];
    for (std::size_t n = lo; n < hi; ++n) {
      const Trajectory& tr = test.individuals[n];
      PartialTrajectory p;
      p.sex = tr.sex;
      double cut;
      if (opt.protocol == Protocol::UniformAge) {
        std::mt19937_64 rng(stream_seed(opt.seed, n, kEvalSalt));
        const double c = opt.age_lo + (opt.age_hi - opt.age_lo) * unif(rng);
        cut = std::max(c, tr.rho);
        p.rho_prime = tr.rho;
      } else {
        cut = tr.tau - opt.horizon;
        p.rho_prime = std::min(tr.rho, cut);
      }
      if (cut >= tr.tau || cut < 0) {
        ++skipped[b];
        continue;
      }
      p.tau_prime = cut;
      std::vector<char> censored_entry(M, 0);
      for (std::size_t m = 0; m < M; ++m) {
        if (tr.kappa[m] == CensorMark::Unreliable) {
          if (tr.rho <= cut) p.unreliable.push_back(m);
          else censored_entry[m] = 1;
        } else if (tr.kappa[m] == CensorMark::Observed && tr.d[m] == Presence::Present && tr.t[m] <= cut) {
          p.observed.emplace_back(m, tr.t[m]);
        }
      }
      const VectorX phi = f.cluster_posterior(p);
      const auto status = f.statuses(p);
      const double end = opt.protocol == Protocol::UniformAge ? tr.tau : cut + opt.horizon;
      for (std::size_t m = 0; m < M; ++m) {
        if (status[m] != ConditionStatus::Open) continue;
        if (censored_entry[m]) {
          ++censored[b];
          if (!opt.include_window_censored) continue;
        }
        const bool positive = censored_entry[m] ||
                              (tr.kappa[m] == CensorMark::Observed && tr.d[m] == Presence::Present &&
                               tr.t[m] > cut && tr.t[m] <= tr.tau);
        const double score = opt.protocol == Protocol::UniformAge ? f.total_future_risk(phi, m, cut)
                                                                  : f.window_risk(phi, m, cut, end);
        double err = std::numeric_limits<double>::quiet_NaN();
        if (positive && !censored_entry[m]) {
          const auto pred = opt.protocol == Protocol::UniformAge ? f.window_mean_onset(phi, m, cut, end)
                                                                 : f.window_map_onset(phi, m, cut, end);
          if (pred) err = std::abs(*pred - tr.t[m]);
        }
        out.push_back({static_cast<std::uint32_t>(m), positive ? 1 : 0, score, err});
      }
    }
  });

  EvalReport rep;
  rep.protocol = opt.protocol;
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::vector<double>> cs(M);
  std::vector<std::vector<int>> cl(M);
  std::vector<double> err_sum(M, 0);
  std::vector<std::size_t> err_n(M, 0);
  std::size_t correct = 0;
  double total_err = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    rep.individuals_skipped += skipped[b];
    rep.window_censored += censored[b];
    for (const Item& it : items[b]) {
      scores.push_back(it.score);
      labels.push_back(it.label);
      cs[it.m].push_back(it.score);
      cl[it.m].push_back(it.label);
      correct += (it.score > opt.threshold) == (it.label == 1);
      if (!std::isnan(it.abs_err)) {
        total_err += it.abs_err;
        ++rep.mae_count;
        err_sum[it.m] += it.abs_err;
        ++err_n[it.m];
      }
    }
  }
  rep.individuals_scored = N - rep.individuals_skipped;
  rep.items = scores.size();
  rep.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  rep.accuracy = rep.items ? static_cast<double>(correct) / static_cast<double>(rep.items) : 0.0;
  rep.auroc = auroc(scores, labels);
  if (rep.mae_count) rep.mae = total_err / static_cast<double>(rep.mae_count);
  rep.per_condition.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    auto& c = rep.per_condition[m];
    c.positives = static_cast<std::size_t>(std::count(cl[m].begin(), cl[m].end(), 1));
    c.negatives = cl[m].size() - c.positives;
    c.auroc = auroc(cs[m], cl[m]);
    if (err_n[m]) c.mae = err_sum[m] / static_cast<double>(err_n[m]);
    if (!cs[m].empty()) c.mean_score = std::accumulate(cs[m].begin(), cs[m].end(), 0.0) / static_cast<double>(cs[m].size());
  }
  return rep;
}

PresenceMetrics presence_metrics(const Forecaster& f, const Dataset& test, std::uint64_t seed, double age_lo,
                                 double age_hi) {
  EvalOptions opt;
  opt.seed = seed;
  opt.age_lo = age_lo;
  opt.age_hi = age_hi;
  const auto rep = evaluate(f, test, opt);
  return {rep.accuracy, rep.auroc};
}

std::optional<double> onset_mae(const Forecaster& f, const Dataset& test, const EvalOptions& opt) {
  return evaluate(f, test, opt).mae;
}

HoldoutResult holdout_protocol(const Forecaster& f, const Dataset& test, double horizon,
                               bool include_window_censored) {
  EvalOptions opt;
  opt.protocol = Protocol::LastYears;
  opt.horizon = horizon;
  opt.include_window_censored = include_window_censored;
  const auto rep = evaluate(f, test, opt);
  return {rep.auroc, rep.mae};
}

double heldout_recovery(const Forecaster& f, const Dataset& test, const std::vector<int>& true_labels,
                        int threads) {
  const auto K = static_cast<Eigen::Index>(f.K());
  RowMatrixX probs(static_cast<Eigen::Index>(test.N()), K);
  parallel_blocks(test.N(), threads, [&](std::size_t, std::size_t lo, std::size_t hi) {
    for (std::size_t n = lo; n < hi; ++n)
      probs.row(static_cast<Eigen::Index>(n)) = f.trajectory_posterior(test.individuals[n]).transpose();
  });
  return cluster_recovery(true_labels, probs);
}

std::vector<SweepRow> k_sweep(const Dataset& train, const Dataset& test, const PriorSpec& prior,
                              const std::vector<std::size_t>& k_grid, double epsilon, int max_iter,
                              std::uint64_t seed, int threads, double horizon) {
  if (k_grid.empty()) throw std::invalid_argument("k_sweep: empty K grid");
  std::vector<SweepRow> rows;
  for (std::size_t K : k_grid) {
    FitOptions fo;
    fo.K = K;
    fo.epsilon = epsilon;
    fo.max_iter = max_iter;
    fo.seed = seed;
    fo.threads = threads;
    auto res = fit(train, prior.build(train.M(), K), fo);
    const Forecaster f(std::move(res.model));
    EvalOptions eo;
    eo.protocol = Protocol::LastYears;
    eo.horizon = horizon;
    eo.threads = threads;
    const auto rep = evaluate(f, test, eo);
    rows.push_back({K, rep.auroc, f.model().fit_meta.iterations, f.model().fit_meta.converged});
  }
  return rows;
}

}  // namespace accrual
