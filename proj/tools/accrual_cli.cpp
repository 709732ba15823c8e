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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>

#include "accrual/evaluation.hpp"
#include "accrual/forecast.hpp"
#include "accrual/io.hpp"
#include "accrual/parallel.hpp"
#include "accrual/service.hpp"
#include "accrual/synthgen.hpp"
#include "accrual/vb.hpp"

namespace fs = std::filesystem;
using namespace accrual;

namespace {

const char* kFormats = R"(
File formats:
  dataset directory   individuals.csv  id,sex,baseline_age,extraction_age,vital_status
                      events.csv       id,condition_code,age_at_diagnosis
                      conditions.csv   code,name,sex_specific,lifelong
                      sex is M, F or U; vital_status is alive or dead;
                      sex_specific is empty or male_only; lifelong is 0 or 1.
  model               JSON document with schema_version (see docs/formats.md)
  config              key = value lines; '#' comments
  patient             JSON: {"sex", "baseline_age", "current_age",
                      "observed": [{"code", "age"}], "unreliable": [code],
                      "horizon", "grid_step"}
Environment:
  ACCRUAL_THREADS     default worker count when --threads is not given
)";

std::string fmt(double x) { return format_double(x); }
std::string fmt(const std::optional<double>& x) { return x ? format_double(*x) : "NA"; }

void print_violations(const std::vector<Violation>& v, std::size_t limit = 50) {
  for (std::size_t i = 0; i < v.size() && i < limit; ++i)
    std::cerr << "violation: individual '" << v[i].individual << "' condition '" << v[i].condition
              << "': " << v[i].rule << "\n";
  if (v.size() > limit) std::cerr << "... " << v.size() - limit << " more\n";
}

Dataset load_or_report(const fs::path& dir, bool permissive) {
  LoadOptions lo;
  lo.permissive = permissive;
  auto res = load_dataset_dir(dir, lo);
  if (!res.warnings.empty()) {
    std::cerr << "warning: " << res.warnings.size() << " data violation(s) accepted in permissive mode\n";
    print_violations(res.warnings, 10);
  }
  return std::move(res.dataset);
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::size_t> parse_grid(const std::string& spec) {
  std::vector<std::size_t> out;
  std::size_t lo = 0, hi = 0, step = 1;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  in >> lo;
  if (!in) throw CLI::ValidationError("--grid", "expected lo:hi:step");
  if (in >> c1) {
    if (c1 != ':' || !(in >> hi)) throw CLI::ValidationError("--grid", "expected lo:hi:step");
    if (in >> c2) {
      if (c2 != ':' || !(in >> step)) throw CLI::ValidationError("--grid", "expected lo:hi:step");
    }
  } else {
    hi = lo;
  }
  if (lo < 1 || step < 1) throw CLI::ValidationError("--grid", "K values and step must be >= 1");
  for (std::size_t k = lo; k <= hi; k += step) out.push_back(k);
  if (out.empty()) throw CLI::ValidationError("--grid", "empty K grid");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"accrual: censored multimorbidity trajectory clustering and forecasting"};
  app.footer(kFormats);
  app.require_subcommand(1);
  int threads = 0;

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic cohort with ground truth");
  std::string sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--config", sim_config, "key = value simulation config")->required();
  sim->add_option("--seed", sim_seed, "override the config seed");
  sim->add_option("--out-dir", sim_out, "output directory")->required();
  sim->add_option("--threads", threads, "worker threads");

  // fit
  auto* fitc = app.add_subcommand("fit", "fit the variational mixture to a dataset");
  std::string fit_data, fit_out, fit_trace, fit_config, fit_pi = "exact";
  std::size_t fit_k = 10;
  double fit_tol = 0;
  int fit_max_iter = 500;
  std::uint64_t fit_seed = 1;
  bool fit_permissive = false, fit_verbose = false;
  fitc->add_option("--data", fit_data, "dataset directory")->required();
  auto* fit_k_opt = fitc->add_option("--k", fit_k, "number of clusters")->check(CLI::PositiveNumber);
  auto* fit_tol_opt = fitc->add_option("--tol", fit_tol, "convergence threshold on the parameter change (<= 0: default)");
  auto* fit_iter_opt = fitc->add_option("--max-iter", fit_max_iter, "iteration cap")->check(CLI::NonNegativeNumber);
  auto* fit_seed_opt = fitc->add_option("--seed", fit_seed, "initialisation seed");
  fitc->add_option("--out", fit_out, "model file")->required();
  fitc->add_option("--trace", fit_trace, "convergence trace table (default: <out>.trace.tsv)");
  fitc->add_option("--config", fit_config, "config file with prior_* keys");
  auto* fit_pi_opt = fitc->add_option("--pi-update", fit_pi, "incomplete presence update")->check(CLI::IsMember({"exact", "literal"}));
  fitc->add_flag("--permissive", fit_permissive, "accept data violations as warnings");
  fitc->add_flag("--verbose", fit_verbose, "print progress");
  fitc->add_option("--threads", threads, "worker threads");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score a model on held-out data");
  std::string ev_model, ev_test, ev_protocol = "uniform-age", ev_breakdown, ev_truth;
  std::uint64_t ev_seed = 1;
  double ev_horizon = 10;
  bool ev_window_censored = false;
  ev->add_option("--model", ev_model, "model file")->required();
  ev->add_option("--test", ev_test, "test dataset directory")->required();
  ev->add_option("--protocol", ev_protocol, "uniform-age | last-10-years")
      ->check(CLI::IsMember({"uniform-age", "last-10-years"}));
  ev->add_option("--seed", ev_seed, "evaluation seed");
  ev->add_option("--horizon", ev_horizon, "held-out window length in years")->check(CLI::PositiveNumber);
  ev->add_flag("--include-window-censored", ev_window_censored,
               "count unreliable entries censored by the window as positives");
  ev->add_option("--breakdown", ev_breakdown, "per-condition table output");
  ev->add_option("--truth", ev_truth, "truth_labels.csv for cluster recovery");
  ev->add_option("--threads", threads, "worker threads");

  // predict
  auto* pr = app.add_subcommand("predict", "risk profile for one partially observed individual");
  std::string pr_model, pr_patient, pr_out;
  std::optional<double> pr_horizon, pr_grid;
  pr->add_option("--model", pr_model, "model file")->required();
  pr->add_option("--patient", pr_patient, "patient JSON file")->required();
  pr->add_option("--horizon", pr_horizon, "window length in years");
  pr->add_option("--grid", pr_grid, "curve grid step in years");
  pr->add_option("--out", pr_out, "output directory (default: JSON on standard output)");

  // sweep-k
  auto* sw = app.add_subcommand("sweep-k", "held-out AUROC across a grid of K");
  std::string sw_data, sw_grid, sw_out, sw_config;
  double sw_tol = 0;
  int sw_max_iter = 500;
  std::uint64_t sw_seed = 1;
  sw->add_option("--data", sw_data, "directory with train/ and test/ datasets")->required();
  sw->add_option("--grid", sw_grid, "K grid lo:hi:step")->required();
  sw->add_option("--tol", sw_tol, "convergence threshold");
  sw->add_option("--max-iter", sw_max_iter, "iteration cap");
  sw->add_option("--seed", sw_seed, "initialisation seed");
  sw->add_option("--config", sw_config, "config file with prior_* keys");
  sw->add_option("--out", sw_out, "table output (default: standard output)");
  sw->add_option("--threads", threads, "worker threads");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP forecast service");
  std::string sv_model, sv_host = "127.0.0.1";
  int sv_port = 8080;
  sv->add_option("--model", sv_model, "model file");
  sv->add_option("--host", sv_host, "bind address");
  sv->add_option("--port", sv_port, "port")->check(CLI::Range(0, 65535));

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      RunConfig rc = load_run_config(sim_config);
      if (sim_seed) rc.sim.seed = *sim_seed;
      rc.sim.validate();
      const SimResult res = generate(rc.sim, resolve_threads(threads));
      const fs::path out(sim_out);
      save_dataset(res.train, out / "train");
      save_dataset(res.test, out / "test");
      save_truth(res, out);
      std::cout << "N\t" << rc.sim.N << "\nM\t" << rc.sim.M << "\nK\t" << rc.sim.K << "\ntrain\t" << res.train.N()
                << "\ntest\t" << res.test.N() << "\nmean_conditions\t" << fmt(res.mean_conditions)
                << "\nmean_recorded_conditions\t" << fmt(res.mean_recorded_conditions) << "\n";
      return 0;
    }

    if (*fitc) {
      RunConfig rc;
      if (!fit_config.empty()) rc = load_run_config(fit_config);
      const Dataset data = load_or_report(fit_data, fit_permissive);
      if (!fit_permissive) {
        if (auto v = validate_dataset(data); !v.empty()) {
          print_violations(v);
          return 1;
        }
      }
      FitOptions fo;
      // command-line flags override config values
      fo.K = fit_k_opt->count() || fit_config.empty() ? fit_k : rc.K;
      fo.epsilon = fit_tol_opt->count() || fit_config.empty() ? fit_tol : rc.tol;
      fo.max_iter = fit_iter_opt->count() || fit_config.empty() ? fit_max_iter : rc.max_iter;
      fo.seed = fit_seed_opt->count() || fit_config.empty() ? fit_seed : rc.fit_seed;
      fo.threads = resolve_threads(threads);
      fo.pi_update = fit_pi_opt->count() || fit_config.empty()
                         ? (fit_pi == "literal" ? PiUpdate::Literal : PiUpdate::Exact)
                         : rc.pi_update;
      if (fit_verbose)
        fo.on_iteration = [](int it, double d) {
          if (it % 10 == 0) std::cerr << "iteration " << it << " delta " << d << "\n";
        };
      const FitResult res = fit(data, rc.prior.build(data.M(), fo.K), fo);
      save_model(res.model, fit_out);
      std::string trace = "iteration\tdelta\n";
      for (std::size_t i = 0; i < res.trace.size(); ++i) trace += std::to_string(i + 1) + "\t" + fmt(res.trace[i]) + "\n";
      write_file(fit_trace.empty() ? fs::path(fit_out + ".trace.tsv") : fs::path(fit_trace), trace);
      const auto& fm = res.model.fit_meta;
      std::cout << "iterations\t" << fm.iterations << "\nfinal_delta\t" << fmt(fm.final_delta) << "\nepsilon\t"
                << fmt(fm.epsilon) << "\nconverged\t" << (fm.converged ? "true" : "false") << "\n";
      if (!fm.converged) std::cerr << "warning: stopped at the iteration cap before convergence\n";
      return 0;
    }

    if (*ev) {
      const Forecaster f(load_model(ev_model));
      const Dataset test = load_or_report(ev_test, false);
      if (test.M() != f.M())
        throw std::invalid_argument("model has M=" + std::to_string(f.M()) + " but test data has M=" +
                                    std::to_string(test.M()));
      EvalOptions eo;
      eo.protocol = *parse_protocol(ev_protocol);
      eo.seed = ev_seed;
      eo.horizon = ev_horizon;
      eo.include_window_censored = ev_window_censored;
      eo.threads = resolve_threads(threads);
      const EvalReport rep = evaluate(f, test, eo);
      std::cout << "protocol\t" << protocol_name(rep.protocol) << "\nindividuals_scored\t" << rep.individuals_scored
                << "\nindividuals_skipped\t" << rep.individuals_skipped << "\nitems\t" << rep.items << "\npositives\t"
                << rep.positives << "\naccuracy\t" << fmt(rep.accuracy) << "\nauroc\t" << fmt(rep.auroc) << "\nmae\t"
                << fmt(rep.mae) << "\nmae_count\t" << rep.mae_count << "\nscored_set\tnot-yet-observed conditions\n";
      if (rep.protocol == Protocol::LastYears) {
        EvalOptions alt = eo;
        alt.include_window_censored = !eo.include_window_censored;
        const EvalReport other = evaluate(f, test, alt);
        std::cout << "window_censored_entries\t" << rep.window_censored << "\nwindow_censored_included\t"
                  << (eo.include_window_censored ? "true" : "false") << "\nalt_auroc\t" << fmt(other.auroc)
                  << "\nalt_mae\t" << fmt(other.mae) << "\n";
      }
      if (!ev_truth.empty()) {
        const auto rows = read_file(ev_truth);
        std::unordered_map<std::string, int> label;
        std::istringstream in(rows);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
          const auto a = line.find(','), b = line.rfind(',');
          if (a == std::string::npos || a == b) continue;
          if (line.substr(0, a) == "test") label[line.substr(a + 1, b - a - 1)] = std::stoi(line.substr(b + 1));
        }
        std::vector<int> labels;
        for (const auto& p : test.individuals) {
          const auto it = label.find(p.id);
          if (it == label.end()) throw std::runtime_error("truth file has no test label for '" + p.id + "'");
          labels.push_back(it->second);
        }
        std::cout << "cluster_recovery\t" << fmt(heldout_recovery(f, test, labels, eo.threads)) << "\n";
      }
      if (!ev_breakdown.empty()) {
        std::string t = "code\tpositives\tnegatives\tauroc\tmae\tmean_score\n";
        for (std::size_t m = 0; m < f.M(); ++m) {
          const auto& c = rep.per_condition[m];
          t += f.model().conditions[m].code + "\t" + std::to_string(c.positives) + "\t" + std::to_string(c.negatives) +
               "\t" + fmt(c.auroc) + "\t" + fmt(c.mae) + "\t" + fmt(c.mean_score) + "\n";
        }
        write_file(ev_breakdown, t);
      }
      return 0;
    }

    if (*pr) {
      const Forecaster f(load_model(pr_model));
      nlohmann::json body;
      try {
        body = nlohmann::json::parse(read_file(pr_patient));
      } catch (const nlohmann::json::parse_error& e) {
        std::cerr << "error: " << pr_patient << ": malformed JSON\n";
        return 1;
      }
      if (pr_horizon) body["horizon"] = *pr_horizon;
      if (pr_grid) body["grid_step"] = *pr_grid;
      ForecastRequest req;
      const RequestCheck chk = parse_forecast_request(body, f, req);
      if (chk.status != 200) {
        for (const auto& e : chk.errors) std::cerr << "violation: " << e.field << ": " << e.message << "\n";
        return 1;
      }
      const nlohmann::json resp = forecast_response(f, req);
      if (pr_out.empty()) {
        std::cout << resp.dump() << "\n";
        return 0;
      }
      const fs::path out(pr_out);
      write_file(out / "risk_profile.json", resp.dump());
      std::string clusters = "cluster\tprobability\n";
      for (std::size_t k = 0; k < resp["cluster_probs"].size(); ++k)
        clusters += std::to_string(k) + "\t" + fmt(resp["cluster_probs"][k].get<double>()) + "\n";
      std::string conds = "code\tstatus\ttotal_future_risk\tprob_within\tmap_onset\n";
      std::string curves = "code\tage\tcumulative_risk\n";
      for (const auto& c : resp["conditions"]) {
        const std::string code = c["code"].get<std::string>();
        conds += code + "\t" + c["status"].get<std::string>() + "\t" + fmt(c["total_future_risk"].get<double>()) + "\t" +
                 fmt(c["prob_within"].get<double>()) + "\t" +
                 (c["map_onset"].is_null() ? std::string("NA") : fmt(c["map_onset"].get<double>())) + "\n";
        const auto& ages = c["curve"]["age"];
        const auto& risk = c["curve"]["risk"];
        for (std::size_t i = 0; i < ages.size(); ++i)
          curves += code + "\t" + fmt(ages[i].get<double>()) + "\t" + fmt(risk[i].get<double>()) + "\n";
      }
      write_file(out / "cluster_probs.tsv", clusters);
      write_file(out / "conditions.tsv", conds);
      write_file(out / "curves.tsv", curves);
      return 0;
    }

    if (*sw) {
      RunConfig rc;
      if (!sw_config.empty()) rc = load_run_config(sw_config);
      const auto grid = parse_grid(sw_grid);
      const Dataset train = load_or_report(fs::path(sw_data) / "train", false);
      const Dataset test = load_or_report(fs::path(sw_data) / "test", false);
      const auto rows = k_sweep(train, test, rc.prior, grid, sw_tol, sw_max_iter, sw_seed, resolve_threads(threads));
      std::string t = "K\tauroc\titerations\tconverged\n";
      for (const auto& r : rows)
        t += std::to_string(r.K) + "\t" + fmt(r.auroc) + "\t" + std::to_string(r.iterations) + "\t" +
             (r.converged ? "true" : "false") + "\n";
      if (sw_out.empty()) std::cout << t;
      else write_file(sw_out, t);
      return 0;
    }

    if (*sv) {
      std::shared_ptr<const Forecaster> model;
      std::string hash;
      if (!sv_model.empty()) {
        const std::string bytes = read_file(sv_model);
        hash = hash_hex(fnv1a64(bytes));
        model = std::make_shared<const Forecaster>(load_model(sv_model));
      } else {
        std::cerr << "warning: no model loaded; forecast endpoints answer 503\n";
      }
      ForecastService service(model, hash);
      std::cerr << "listening on " << sv_host << ":" << sv_port << "\n";
      return run_server(service, sv_host, sv_port) ? 0 : 1;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    print_violations(e.violations);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
