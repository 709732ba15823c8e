// Copyright 2026 The accrual Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <memory>
#include <thread>

#include "accrual/service.hpp"
#include "accrual/synthgen.hpp"
#include "accrual/vb.hpp"
#include "fixtures.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace accrual;
using nlohmann::json;

namespace {

std::shared_ptr<const Forecaster> toy() { return std::make_shared<const Forecaster>(fixture::toy_model()); }

json request() {
  return {{"baseline_age", 45},
          {"current_age", 58},
          {"horizon", 10},
          {"grid_step", 0.5},
          {"sex", "M"},
          {"observed", {{{"code", "X1"}, {"age", 52.5}}}},
          {"unreliable", {"X2"}}};
}

std::vector<std::string> fields(const json& body) {
  std::vector<std::string> out;
  for (const auto& e : body.at("errors")) out.push_back(e.at("field").get<std::string>());
  return out;
}

}  // namespace

TEST_CASE("forecast handler returns the forecaster's numbers") {
  const auto f = toy();
  const ForecastService svc(f, "fnv1a64:0");
  const auto r = svc.forecast(request().dump());
  REQUIRE(r.status == 200);
  const auto body = json::parse(r.body);
  CHECK(body.at("schema_version") == kWireSchemaVersion);

  PartialTrajectory p;
  p.rho_prime = 45;
  p.tau_prime = 58;
  p.sex = Sex::Male;
  p.observed = {{1, 52.5}};
  p.unreliable = {2};
  const auto rp = f->profile(p, 10, 0.5);
  for (Eigen::Index k = 0; k < 2; ++k) CHECK(body["cluster_probs"][k].get<double>() == rp.cluster_probs(k));
  const auto& c0 = body["conditions"][0];
  CHECK(c0["status"] == "open");
  CHECK(c0["total_future_risk"].get<double>() == rp.conditions[0].total_future_risk);
  CHECK(c0["prob_within"].get<double>() == rp.conditions[0].prob_within);
  CHECK(c0["map_onset"].get<double>() == *rp.conditions[0].map_onset);
  CHECK(c0["curve"]["age"].get<std::vector<double>>() == rp.conditions[0].ages);
  CHECK(c0["curve"]["risk"].get<std::vector<double>>() == rp.conditions[0].risk);
  CHECK(body["conditions"][1]["status"] == "history");
  CHECK(body["conditions"][1]["map_onset"].is_null());

  // pure function of the request
  CHECK(svc.forecast(request().dump()).body == r.body);
}

TEST_CASE("forecast request errors") {
  const ForecastService svc(toy(), "fnv1a64:0");
  SUBCASE("malformed JSON") {
    const auto r = svc.forecast("{\"baseline_age\": ");
    CHECK(r.status == 400);
    CHECK(json::parse(r.body)["status"] == 400);
  }
  SUBCASE("not an object") { CHECK(svc.forecast("[1,2]").status == 400); }
  SUBCASE("malformed age names the field") {
    auto q = request();
    q["current_age"] = "sixty";
    const auto r = svc.forecast(q.dump());
    CHECK(r.status == 400);
    CHECK(fields(json::parse(r.body)) == std::vector<std::string>{"current_age"});
  }
  SUBCASE("observed age after current age") {
    auto q = request();
    q["observed"][0]["age"] = 59;
    const auto r = svc.forecast(q.dump());
    CHECK(r.status == 400);
    CHECK(fields(json::parse(r.body)) == std::vector<std::string>{"observed[0].age"});
  }
  SUBCASE("missing required fields") {
    const auto r = svc.forecast(json{{"observed", json::array()}}.dump());
    CHECK(r.status == 400);
    const auto f = fields(json::parse(r.body));
    CHECK(std::count(f.begin(), f.end(), "baseline_age") == 1);
    CHECK(std::count(f.begin(), f.end(), "current_age") == 1);
  }
  SUBCASE("bad horizon and grid") {
    auto q = request();
    q["horizon"] = 0;
    q["grid_step"] = 1e-9;
    const auto f = fields(json::parse(svc.forecast(q.dump()).body));
    CHECK(f == std::vector<std::string>{"horizon", "grid_step"});
  }
  SUBCASE("unknown code is 422") {
    auto q = request();
    q["unreliable"] = {"NOPE"};
    const auto r = svc.forecast(q.dump());
    CHECK(r.status == 422);
    CHECK(fields(json::parse(r.body)) == std::vector<std::string>{"unreliable[0]"});
  }
  SUBCASE("shape errors take precedence over unknown codes") {
    auto q = request();
    q["unreliable"] = {"NOPE"};
    q["baseline_age"] = nullptr;
    CHECK(svc.forecast(q.dump()).status == 400);
  }
  SUBCASE("duplicate condition") {
    auto q = request();
    q["unreliable"] = {"X1"};
    CHECK(svc.forecast(q.dump()).status == 400);
  }
}

TEST_CASE("no model loaded") {
  const ForecastService svc(nullptr, "");
  for (const auto& r : {svc.summary(), svc.forecast(request().dump())}) {
    CHECK(r.status == 503);
    const auto b = json::parse(r.body);
    CHECK(b["status"] == 503);
    CHECK(b.contains("error"));
  }
  const auto h = json::parse(svc.health().body);
  CHECK(h["model_loaded"] == false);
  CHECK(h["model_hash"].is_null());
  CHECK(h["version"] == ACCRUAL_VERSION);
}

TEST_CASE("summary equals the model") {
  const auto f = toy();
  const ForecastService svc(f, "fnv1a64:0123");
  const auto r = svc.summary();
  REQUIRE(r.status == 200);
  const auto s = json::parse(r.body);
  const auto& m = f->model();
  CHECK(s["K"] == 2);
  CHECK(s["M"] == 3);
  CHECK(s["conditions"][2]["code"] == "X2");
  for (Eigen::Index k = 0; k < 2; ++k) CHECK(s["theta_bar"][k].get<double>() == m.theta_bar(k));
  for (Eigen::Index i = 0; i < 3; ++i)
    for (Eigen::Index k = 0; k < 2; ++k) {
      CHECK(s["pi_bar"][i][k].get<double>() == m.pi_bar(i, k));
      CHECK(s["onset_mean"][i][k].get<double>() == m.u(i, k));
      CHECK(s["nig"][i][k][3].get<double>() == m.beta(i, k));
      const double sd = std::sqrt(m.beta(i, k) * (m.v(i, k) + 1) / (m.v(i, k) * (m.alpha(i, k) - 1)));
      CHECK(s["onset_sd"][i][k].get<double>() == doctest::Approx(sd).epsilon(1e-15));
    }
  CHECK(json::parse(svc.health().body)["model_hash"] == "fnv1a64:0123");
}

TEST_CASE("summary payload at K=50, M=80 stays under 1 MB") {
  FittedModel big;
  big.K = 50;
  big.conditions = fixture::conditions(80);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.001, 1);
  big.theta_bar = VectorX::NullaryExpr(50, [&] { return u(rng); });
  big.theta_bar /= big.theta_bar.sum();
  big.pi_bar = MatrixX::NullaryExpr(80, 50, [&] { return u(rng); });
  big.u = MatrixX::NullaryExpr(80, 50, [&] { return 30 + 40 * u(rng); });
  big.v = MatrixX::NullaryExpr(80, 50, [&] { return 1000 * u(rng); });
  big.alpha = MatrixX::NullaryExpr(80, 50, [&] { return 2 + 1000 * u(rng); });
  big.beta = MatrixX::NullaryExpr(80, 50, [&] { return 1e5 * u(rng); });
  const auto body = ForecastService(std::make_shared<const Forecaster>(big), "x").summary().body;
  MESSAGE("summary bytes " << body.size());
  CHECK(body.size() < 1000000);
}

TEST_CASE("live server round trip") {
  const ForecastService svc(toy(), "fnv1a64:00000000000000aa");
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto h = cli.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(json::parse(h->body)["status"] == "ok");
  auto s = cli.Get("/v1/model/summary");
  REQUIRE(s);
  CHECK(s->body == svc.summary().body);
  CHECK(s->get_header_value("Content-Type") == "application/json");
  auto f = cli.Post("/v1/forecast", request().dump(), "application/json");
  REQUIRE(f);
  CHECK(f->status == 200);
  CHECK(f->body == svc.forecast(request().dump()).body);
  auto e = cli.Post("/v1/forecast", "{", "application/json");
  REQUIRE(e);
  CHECK(e->status == 400);
  auto missing = cli.Get("/v1/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);

  server.stop();
  th.join();
}

TEST_CASE("what-if query against a synthetic fit") {
  SimConfig c;
  c.N = 3000;
  c.M = 10;
  c.K = 3;
  c.weight_lo = 0.2;
  c.weight_hi = 0.5;
  const auto sim = generate(c);
  FitOptions fo;
  fo.K = 3;
  fo.max_iter = 40;
  auto res = fit(sim.train, PriorSpec{}.build(10, 3), fo);
  const ForecastService svc(std::make_shared<const Forecaster>(std::move(res.model)), "h");
  // a man with one diagnosis at 54, asking at 60
  const json q = {{"baseline_age", 40}, {"current_age", 60}, {"sex", "M"}, {"observed", {{{"code", "C03"}, {"age", 54}}}}};
  const auto r = svc.forecast(q.dump());
  REQUIRE(r.status == 200);
  const auto b = json::parse(r.body);
  double sum = 0;
  for (const auto& p : b["cluster_probs"]) sum += p.get<double>();
  CHECK(std::abs(sum - 1.0) <= 1e-12);
  for (const auto& cond : b["conditions"]) {
    const auto risk = cond["curve"]["risk"].get<std::vector<double>>();
    CHECK(std::is_sorted(risk.begin(), risk.end()));
    CHECK(risk.back() <= cond["total_future_risk"].get<double>() + 1e-12);
    CHECK(cond["curve"]["age"].size() == risk.size());
  }
  CHECK(b["conditions"][2]["status"] == "history");
}
