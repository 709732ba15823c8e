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

// Forecast wire format and the HTTP front end that serves it.

#ifndef ACCRUAL_SERVICE_HPP
#define ACCRUAL_SERVICE_HPP

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "accrual/forecast.hpp"

namespace httplib {
class Server;
}

namespace accrual {

inline constexpr int kWireSchemaVersion = 1;

struct ForecastRequest {
  PartialTrajectory patient;
  double horizon{10.0};
  double grid_step{1.0};
};

struct RequestCheck {
  int status{200};  // 200, 400 or 422
  std::vector<FieldError> errors;
};

RequestCheck parse_forecast_request(const nlohmann::json& body, const Forecaster& f, ForecastRequest& out);
nlohmann::json forecast_response(const Forecaster& f, const ForecastRequest& req);
nlohmann::json model_summary(const Forecaster& f);
nlohmann::json error_body(int status, const std::string& message, const std::vector<FieldError>& errors = {});

struct HttpReply {
  int status{200};
  std::string body;
};

class ForecastService {
 public:
  // model may be null; forecast endpoints then answer 503.
  ForecastService(std::shared_ptr<const Forecaster> model, std::string model_hash);

  HttpReply summary() const;
  HttpReply forecast(const std::string& body) const;
  HttpReply health() const;

  void mount(httplib::Server& server) const;

 private:
  std::shared_ptr<const Forecaster> model_;
  std::string model_hash_;
  std::string summary_cache_;
};

// Blocks until the server stops.
bool run_server(const ForecastService& service, const std::string& host, int port);

}  // namespace accrual

#endif  // ACCRUAL_SERVICE_HPP
