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

// Dataset tables, model documents and run configuration files.

#ifndef ACCRUAL_IO_HPP
#define ACCRUAL_IO_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "accrual/model.hpp"
#include "accrual/synthgen.hpp"

namespace accrual {

inline constexpr int kModelSchemaVersion = 1;

// Syntax problem at a file position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, std::size_t column, const std::string& what);
  std::string file;
  std::size_t line;
  std::size_t column;
};

// Well-formed input that breaks a data rule.
class DataError : public std::runtime_error {
 public:
  explicit DataError(std::vector<Violation> v);
  std::vector<Violation> violations;
};

std::string format_double(double x);

struct LoadOptions {
  bool permissive{false};  // downgrade violations to warnings
};

struct LoadResult {
  Dataset dataset;
  std::vector<Violation> warnings;
};

LoadResult load_dataset(const std::filesystem::path& individuals, const std::filesystem::path& events,
                        const std::filesystem::path& conditions, const LoadOptions& opt = {});
// dir/individuals.csv, dir/events.csv, dir/conditions.csv
LoadResult load_dataset_dir(const std::filesystem::path& dir, const LoadOptions& opt = {});
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

std::vector<ConditionMeta> load_conditions(const std::filesystem::path& path);

nlohmann::json model_to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& doc);
std::string serialize_model(const FittedModel& model);
void save_model(const FittedModel& model, const std::filesystem::path& path);
FittedModel load_model(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);
std::uint64_t fnv1a64(const std::string& bytes);

struct RunConfig {
  SimConfig sim;
  PriorSpec prior;
  std::size_t K{10};
  double tol{0.0};
  int max_iter{500};
  std::uint64_t fit_seed{1};
  PiUpdate pi_update{PiUpdate::Exact};
};

// Flat key = value lines; '#' starts a comment.
std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin);
RunConfig apply_key_values(const std::map<std::string, std::string>& kv, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

void save_truth(const SimResult& sim, const std::filesystem::path& dir);

}  // namespace accrual

#endif  // ACCRUAL_IO_HPP
