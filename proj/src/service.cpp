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

#include "accrual/service.hpp"

#include <cmath>
#include <unordered_map>

#include <httplib.h>

namespace accrual {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxGridPoints = 20000;
constexpr const char* kJson = "application/json";

const char* status_name(ConditionStatus s) {
  switch (s) {
    case ConditionStatus::History: return "history";
    case ConditionStatus::KnownAbsent: return "known_absent";
    default: return "open";
  }
}

json number_or_null(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

}  // namespace

json error_body(int status, const std::string& message, const std::vector<FieldError>& errors) {
  json e = {{"schema_version", kWireSchemaVersion}, {"status", status}, {"error", message}};
  json list = json::array();
  for (const auto& fe : errors) list.push_back({{"field", fe.field}, {"message", fe.message}});
  e["errors"] = std::move(list);
  return e;
}

RequestCheck parse_forecast_request(const json& body, const Forecaster& f, ForecastRequest& out) {
  RequestCheck chk;
  auto bad = [&](const std::string& field, const std::string& msg) { chk.errors.push_back({field, msg}); };
  if (!body.is_object()) {
    chk.status = 400;
    bad("body", "must be a JSON object");
    return chk;
  }
  auto read_number = [&](const char* key, bool required, double& dst) {
    if (!body.contains(key)) {
      if (required) bad(key, "is required");
      return;
    }
    const auto& v = body.at(key);
    if (!v.is_number()) {
      bad(key, "must be a number");
      return;
    }
    dst = v.get<double>();
    if (!std::isfinite(dst)) bad(key, "must be finite");
  };
  ForecastRequest req;
  read_number("baseline_age", true, req.patient.rho_prime);
  read_number("current_age", true, req.patient.tau_prime);
  read_number("horizon", false, req.horizon);
  read_number("grid_step", false, req.grid_step);
  if (body.contains("horizon") && body["horizon"].is_number() && !(req.horizon > 0)) bad("horizon", "must be > 0");
  if (body.contains("grid_step") && body["grid_step"].is_number()) {
    if (!(req.grid_step > 0)) bad("grid_step", "must be > 0");
    else if ((kCurveMaxAge - req.patient.tau_prime) / req.grid_step > static_cast<double>(kMaxGridPoints))
      bad("grid_step", "too small for the age range");
  }
  if (body.contains("sex")) {
    const auto& s = body["sex"];
    if (s == "M") req.patient.sex = Sex::Male;
    else if (s == "F") req.patient.sex = Sex::Female;
    else if (s == "U" || s.is_null()) req.patient.sex = Sex::Unknown;
    else bad("sex", "must be 'M', 'F' or 'U'");
  }

  std::unordered_map<std::string, std::size_t> codes;
  for (std::size_t m = 0; m < f.M(); ++m) codes.emplace(f.model().conditions[m].code, m);
  std::vector<FieldError> unknown;
  auto resolve = [&](const json& v, const std::string& field, std::size_t& m) {
    if (!v.is_string()) {
      bad(field, "must be a condition code string");
      return false;
    }
    const auto it = codes.find(v.get<std::string>());
    if (it == codes.end()) {
      unknown.push_back({field, "unknown condition code '" + v.get<std::string>() + "'"});
      return false;
    }
    m = it->second;
    return true;
  };
  if (body.contains("observed")) {
    const auto& obs = body["observed"];
    if (!obs.is_array()) bad("observed", "must be an array");
    else
      for (std::size_t i = 0; i < obs.size(); ++i) {
        const std::string base = "observed[" + std::to_string(i) + "]";
        const auto& o = obs[i];
        if (!o.is_object()) {
          bad(base, "must be an object with code and age");
          continue;
        }
        std::size_t m = 0;
        const bool known = o.contains("code") ? resolve(o["code"], base + ".code", m) : (bad(base + ".code", "is required"), false);
        double age = 0;
        if (!o.contains("age")) bad(base + ".age", "is required");
        else if (!o["age"].is_number()) bad(base + ".age", "must be a number");
        else age = o["age"].get<double>();
        if (known) req.patient.observed.emplace_back(m, age);
      }
  }
  if (body.contains("unreliable")) {
    const auto& un = body["unreliable"];
    if (!un.is_array()) bad("unreliable", "must be an array");
    else
      for (std::size_t i = 0; i < un.size(); ++i) {
        std::size_t m = 0;
        if (resolve(un[i], "unreliable[" + std::to_string(i) + "]", m)) req.patient.unreliable.push_back(m);
      }
  }
  if (!chk.errors.empty()) {
    chk.status = 400;
    return chk;
  }
  if (!unknown.empty()) {
    chk.status = 422;
    chk.errors = std::move(unknown);
    return chk;
  }
  if (auto errs = f.validate(req.patient); !errs.empty()) {
    chk.status = 400;
    chk.errors = std::move(errs);
    return chk;
  }
  out = std::move(req);
  return chk;
}

json forecast_response(const Forecaster& f, const ForecastRequest& req) {
  const RiskProfile rp = f.profile(req.patient, req.horizon, req.grid_step);
  json r;
  r["schema_version"] = kWireSchemaVersion;
  r["baseline_age"] = req.patient.rho_prime;
  r["current_age"] = req.patient.tau_prime;
  r["horizon"] = req.horizon;
  r["grid_step"] = req.grid_step;
  json cp = json::array();
  for (Eigen::Index k = 0; k < rp.cluster_probs.size(); ++k) cp.push_back(rp.cluster_probs(k));
  r["cluster_probs"] = std::move(cp);
  json conds = json::array();
  for (const auto& c : rp.conditions) {
    const auto& meta = f.model().conditions[c.m];
    conds.push_back({{"code", meta.code},
                     {"name", meta.name},
                     {"status", status_name(c.status)},
                     {"total_future_risk", c.total_future_risk},
                     {"prob_within", c.prob_within},
                     {"map_onset", number_or_null(c.map_onset)},
                     {"curve", {{"age", c.ages}, {"risk", c.risk}}}});
  }
  r["conditions"] = std::move(conds);
  return r;
}

json model_summary(const Forecaster& f) {
  const FittedModel& m = f.model();
  json s;
  s["schema_version"] = kWireSchemaVersion;
  s["K"] = m.K;
  s["M"] = m.M();
  json conds = json::array();
  for (const auto& c : m.conditions)
    conds.push_back({{"code", c.code},
                     {"name", c.name},
                     {"sex_specific", c.sex_specific == SexSpecific::MaleOnly ? "male_only" : "none"},
                     {"lifelong", c.lifelong}});
  s["conditions"] = std::move(conds);
  json theta = json::array();
  for (Eigen::Index k = 0; k < m.theta_bar.size(); ++k) theta.push_back(m.theta_bar(k));
  s["theta_bar"] = std::move(theta);
  json pi = json::array(), mean = json::array(), sd = json::array(), nig = json::array();
  const auto below = f.below_zero_mass();
  for (std::size_t i = 0; i < m.M(); ++i) {
    json pr = json::array(), mr = json::array(), sr = json::array(), nr = json::array();
    for (std::size_t k = 0; k < m.K; ++k) {
      const auto mi = static_cast<Eigen::Index>(i), ki = static_cast<Eigen::Index>(k);
      const NIG p = m.nig(mi, ki);
      pr.push_back(m.pi_bar(mi, ki));
      mr.push_back(p.u);
      // predictive standard deviation; undefined for alpha <= 1
      if (p.alpha > 1) sr.push_back(std::sqrt(p.beta * (p.v + 1) / (p.v * (p.alpha - 1))));
      else sr.push_back(nullptr);
      nr.push_back({p.u, p.v, p.alpha, p.beta});
    }
    pi.push_back(std::move(pr));
    mean.push_back(std::move(mr));
    sd.push_back(std::move(sr));
    nig.push_back(std::move(nr));
  }
  s["pi_bar"] = std::move(pi);
  s["onset_mean"] = std::move(mean);
  s["onset_sd"] = std::move(sd);
  s["nig"] = std::move(nig);
  s["below_zero_mass"] = below;
  return s;
}

ForecastService::ForecastService(std::shared_ptr<const Forecaster> model, std::string model_hash)
    : model_(std::move(model)), model_hash_(std::move(model_hash)) {
  if (model_) summary_cache_ = model_summary(*model_).dump();
}

HttpReply ForecastService::summary() const {
  if (!model_) return {503, error_body(503, "no model loaded").dump()};
  return {200, summary_cache_};
}

HttpReply ForecastService::forecast(const std::string& body) const {
  if (!model_) return {503, error_body(503, "no model loaded").dump()};
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error&) {
    return {400, error_body(400, "request body is not valid JSON", {{"body", "malformed JSON"}}).dump()};
  }
  ForecastRequest req;
  const RequestCheck chk = parse_forecast_request(doc, *model_, req);
  if (chk.status != 200) {
    const char* msg = chk.status == 422 ? "unknown condition code" : "invalid request";
    return {chk.status, error_body(chk.status, msg, chk.errors).dump()};
  }
  return {200, forecast_response(*model_, req).dump()};
}

HttpReply ForecastService::health() const {
  json h = {{"status", model_ ? "ok" : "no_model"},
            {"version", ACCRUAL_VERSION},
            {"model_loaded", static_cast<bool>(model_)},
            {"model_hash", model_ ? json(model_hash_) : json(nullptr)}};
  return {200, h.dump()};
}

void ForecastService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, kJson);
  };
  server.Get("/v1/model/summary", [this, send](const httplib::Request&, httplib::Response& res) { send(res, summary()); });
  server.Post("/v1/forecast", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, forecast(req.body));
  });
  server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
}

bool run_server(const ForecastService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  return server.listen(host, port);
}

}  // namespace accrual
