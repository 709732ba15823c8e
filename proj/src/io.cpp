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

#include "accrual/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace accrual {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Field {
  std::string text;
  std::size_t column;
};

struct Row {
  std::size_t line;
  std::vector<Field> fields;
};

std::vector<Row> read_csv(const fs::path& path) {
  const std::string text = read_file(path);
  const std::string file = path.string();
  std::vector<Row> rows;
  std::size_t line = 1, pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view ln(text.data() + pos, end - pos);
    if (!ln.empty() && ln.back() == '\r') ln.remove_suffix(1);
    if (!ln.empty()) {
      Row row{line, {}};
      std::size_t i = 0;
      while (true) {
        Field f{"", i + 1};
        if (i < ln.size() && ln[i] == '"') {
          ++i;
          while (true) {
            if (i >= ln.size()) throw ParseError(file, line, f.column, "unterminated quoted field");
            if (ln[i] == '"') {
              if (i + 1 < ln.size() && ln[i + 1] == '"') {
                f.text += '"';
                i += 2;
                continue;
              }
              ++i;
              break;
            }
            f.text += ln[i++];
          }
          if (i < ln.size() && ln[i] != ',') throw ParseError(file, line, i + 1, "expected ',' after quoted field");
        } else {
          const std::size_t comma = ln.find(',', i);
          const std::size_t stop = comma == std::string_view::npos ? ln.size() : comma;
          f.text.assign(ln.substr(i, stop - i));
          i = stop;
        }
        row.fields.push_back(std::move(f));
        if (i >= ln.size()) break;
        ++i;  // skip comma
        if (i == ln.size()) {
          row.fields.push_back({"", i + 1});
          break;
        }
      }
      rows.push_back(std::move(row));
    }
    pos = end + 1;
    ++line;
  }
  return rows;
}

void expect_header(const std::vector<Row>& rows, const fs::path& path, const std::vector<std::string>& names) {
  if (rows.empty()) throw ParseError(path.string(), 1, 1, "missing header row");
  const Row& h = rows.front();
  if (h.fields.size() != names.size())
    throw ParseError(path.string(), h.line, 1, "header must have " + std::to_string(names.size()) + " columns");
  for (std::size_t i = 0; i < names.size(); ++i)
    if (h.fields[i].text != names[i])
      throw ParseError(path.string(), h.line, h.fields[i].column,
                       "expected column '" + names[i] + "', found '" + h.fields[i].text + "'");
}

void expect_width(const Row& r, const fs::path& path, std::size_t n) {
  if (r.fields.size() != n)
    throw ParseError(path.string(), r.line, 1,
                     "expected " + std::to_string(n) + " fields, found " + std::to_string(r.fields.size()));
}

double parse_number(const Field& f, const Row& r, const fs::path& path) {
  double x = 0;
  const char* b = f.text.data();
  const char* e = b + f.text.size();
  auto [ptr, ec] = std::from_chars(b, e, x);
  if (ec != std::errc() || ptr != e || !std::isfinite(x))
    throw ParseError(path.string(), r.line, f.column, "invalid number '" + f.text + "'");
  return x;
}

bool parse_bool(const Field& f, const Row& r, const fs::path& path) {
  if (f.text == "1" || f.text == "true") return true;
  if (f.text == "0" || f.text == "false" || f.text.empty()) return false;
  throw ParseError(path.string(), r.line, f.column, "invalid boolean '" + f.text + "'");
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const char* sex_code(Sex s) {
  switch (s) {
    case Sex::Male: return "M";
    case Sex::Female: return "F";
    default: return "U";
  }
}

json matrix_json(const MatrixX& x) {
  json rows = json::array();
  for (Eigen::Index m = 0; m < x.rows(); ++m) {
    json row = json::array();
    for (Eigen::Index k = 0; k < x.cols(); ++k) row.push_back(x(m, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixX matrix_from(const json& j, std::size_t M, std::size_t K, const char* name) {
  if (!j.is_array() || j.size() != M) throw std::runtime_error(std::string("model: '") + name + "' must have M rows");
  MatrixX x(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(K));
  for (std::size_t m = 0; m < M; ++m) {
    const auto& row = j[m];
    if (!row.is_array() || row.size() != K) throw std::runtime_error(std::string("model: '") + name + "' rows must have K entries");
    for (std::size_t k = 0; k < K; ++k)
      x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = row[k].get<double>();
  }
  return x;
}

json vector_json(const VectorX& x) {
  json a = json::array();
  for (Eigen::Index k = 0; k < x.size(); ++k) a.push_back(x(k));
  return a;
}

VectorX vector_from(const json& j, std::size_t K, const char* name) {
  if (!j.is_array() || j.size() != K) throw std::runtime_error(std::string("model: '") + name + "' must have K entries");
  VectorX x(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) x(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  return x;
}

std::string condition_line(const ConditionMeta& c) {
  return csv_escape(c.code) + "," + csv_escape(c.name) + "," +
         (c.sex_specific == SexSpecific::MaleOnly ? "male_only" : "") + "," + (c.lifelong ? "1" : "0");
}

}  // namespace

ParseError::ParseError(const std::string& f, std::size_t l, std::size_t c, const std::string& what)
    : std::runtime_error(f + ":" + std::to_string(l) + ":" + std::to_string(c) + ": " + what),
      file(f),
      line(l),
      column(c) {}

namespace {
std::string summarize(const std::vector<Violation>& v) {
  std::string s = std::to_string(v.size()) + " data violation(s)";
  if (!v.empty()) s += "; first: individual '" + v[0].individual + "' condition '" + v[0].condition + "': " + v[0].rule;
  return s;
}
}  // namespace

DataError::DataError(std::vector<Violation> v) : std::runtime_error(summarize(v)), violations(std::move(v)) {}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<ConditionMeta> load_conditions(const fs::path& path) {
  const auto rows = read_csv(path);
  expect_header(rows, path, {"code", "name", "sex_specific", "lifelong"});
  std::vector<ConditionMeta> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Row& r = rows[i];
    expect_width(r, path, 4);
    ConditionMeta c;
    c.code = r.fields[0].text;
    if (c.code.empty()) throw ParseError(path.string(), r.line, 1, "empty condition code");
    c.name = r.fields[1].text;
    const auto& ss = r.fields[2];
    if (ss.text == "male_only") c.sex_specific = SexSpecific::MaleOnly;
    else if (!ss.text.empty() && ss.text != "none")
      throw ParseError(path.string(), r.line, ss.column, "sex_specific must be empty, 'none' or 'male_only'");
    c.lifelong = parse_bool(r.fields[3], r, path);
    out.push_back(std::move(c));
  }
  return out;
}

LoadResult load_dataset(const fs::path& individuals, const fs::path& events, const fs::path& conditions,
                        const LoadOptions& opt) {
  LoadResult res;
  Dataset& ds = res.dataset;
  ds.conditions = load_conditions(conditions);
  const std::size_t M = ds.M();
  std::unordered_map<std::string, std::size_t> code_index;
  for (std::size_t m = 0; m < M; ++m) code_index.emplace(ds.conditions[m].code, m);

  const auto irows = read_csv(individuals);
  expect_header(irows, individuals, {"id", "sex", "baseline_age", "extraction_age", "vital_status"});
  std::unordered_map<std::string, std::size_t> id_index;
  for (std::size_t i = 1; i < irows.size(); ++i) {
    const Row& r = irows[i];
    expect_width(r, individuals, 5);
    Trajectory p;
    p.id = r.fields[0].text;
    if (p.id.empty()) throw ParseError(individuals.string(), r.line, 1, "empty id");
    const auto& sx = r.fields[1];
    if (sx.text == "M") p.sex = Sex::Male;
    else if (sx.text == "F") p.sex = Sex::Female;
    else if (sx.text == "U" || sx.text.empty()) p.sex = Sex::Unknown;
    else throw ParseError(individuals.string(), r.line, sx.column, "sex must be M, F or U");
    p.rho = parse_number(r.fields[2], r, individuals);
    p.tau = parse_number(r.fields[3], r, individuals);
    const auto& vs = r.fields[4];
    if (vs.text == "alive") p.iota = Vital::Alive;
    else if (vs.text == "dead") p.iota = Vital::Dead;
    else throw ParseError(individuals.string(), r.line, vs.column, "vital_status must be 'alive' or 'dead'");
    p.d.assign(M, Presence::Unknown);
    p.t.assign(M, kNoAge);
    p.kappa.assign(M, CensorMark::Incomplete);
    id_index.emplace(p.id, ds.individuals.size());
    ds.individuals.push_back(std::move(p));
  }

  // earliest recorded age per (individual, condition)
  std::vector<double> first(ds.N() * M, std::numeric_limits<double>::quiet_NaN());
  const auto erows = read_csv(events);
  expect_header(erows, events, {"id", "condition_code", "age_at_diagnosis"});
  for (std::size_t i = 1; i < erows.size(); ++i) {
    const Row& r = erows[i];
    expect_width(r, events, 3);
    const auto pit = id_index.find(r.fields[0].text);
    if (pit == id_index.end())
      throw ParseError(events.string(), r.line, r.fields[0].column, "unknown individual '" + r.fields[0].text + "'");
    const auto cit = code_index.find(r.fields[1].text);
    if (cit == code_index.end())
      throw ParseError(events.string(), r.line, r.fields[1].column, "unknown condition '" + r.fields[1].text + "'");
    const double age = parse_number(r.fields[2], r, events);
    double& slot = first[pit->second * M + cit->second];
    if (std::isnan(slot) || age < slot) slot = age;
  }

  std::vector<Violation> ingest;
  for (std::size_t n = 0; n < ds.N(); ++n) {
    Trajectory& p = ds.individuals[n];
    for (std::size_t m = 0; m < M; ++m) {
      const ConditionMeta& c = ds.conditions[m];
      double age = first[n * M + m];
      if (!std::isnan(age) && age > p.tau) {
        ingest.push_back({p.id, c.code, "event after extraction age"});
        age = std::numeric_limits<double>::quiet_NaN();
      }
      if (sex_excluded(c, p.sex) || std::isnan(age)) {
        if (sex_excluded(c, p.sex) || p.iota == Vital::Dead || (c.lifelong && p.tau > 0)) {
          p.d[m] = Presence::Absent;
          p.t[m] = kNoAge;
          p.kappa[m] = CensorMark::Observed;
        } else {
          p.d[m] = Presence::Unknown;
          p.t[m] = p.tau;
          p.kappa[m] = CensorMark::Incomplete;
        }
      } else if (age <= p.rho) {
        p.d[m] = Presence::Present;
        p.t[m] = p.rho;
        p.kappa[m] = CensorMark::Unreliable;
      } else {
        p.d[m] = Presence::Present;
        p.t[m] = age;
        p.kappa[m] = CensorMark::Observed;
      }
    }
  }
  auto violations = validate_dataset(ds);
  violations.insert(violations.begin(), ingest.begin(), ingest.end());
  if (!violations.empty()) {
    if (!opt.permissive) throw DataError(std::move(violations));
    res.warnings = std::move(violations);
  }
  return res;
}

LoadResult load_dataset_dir(const fs::path& dir, const LoadOptions& opt) {
  return load_dataset(dir / "individuals.csv", dir / "events.csv", dir / "conditions.csv", opt);
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  std::string ind = "id,sex,baseline_age,extraction_age,vital_status\n";
  std::string ev = "id,condition_code,age_at_diagnosis\n";
  std::string cond = "code,name,sex_specific,lifelong\n";
  for (const auto& c : ds.conditions) cond += condition_line(c) + "\n";
  for (const auto& p : ds.individuals) {
    ind += csv_escape(p.id) + "," + sex_code(p.sex) + "," + format_double(p.rho) + "," + format_double(p.tau) + "," +
           (p.iota == Vital::Dead ? "dead" : "alive") + "\n";
    for (std::size_t m = 0; m < ds.M(); ++m)
      if (p.d[m] == Presence::Present)
        ev += csv_escape(p.id) + "," + csv_escape(ds.conditions[m].code) + "," + format_double(p.t[m]) + "\n";
  }
  write_file(dir / "individuals.csv", ind);
  write_file(dir / "events.csv", ev);
  write_file(dir / "conditions.csv", cond);
}

json model_to_json(const FittedModel& model) {
  json doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["format"] = "accrual-model";
  doc["K"] = model.K;
  doc["M"] = model.M();
  json conds = json::array();
  for (const auto& c : model.conditions)
    conds.push_back({{"code", c.code},
                     {"name", c.name},
                     {"sex_specific", c.sex_specific == SexSpecific::MaleOnly ? "male_only" : "none"},
                     {"lifelong", c.lifelong}});
  doc["conditions"] = std::move(conds);
  doc["theta_bar"] = vector_json(model.theta_bar);
  doc["pi_bar"] = matrix_json(model.pi_bar);
  doc["nig"] = {{"u", matrix_json(model.u)},
                {"v", matrix_json(model.v)},
                {"alpha", matrix_json(model.alpha)},
                {"beta", matrix_json(model.beta)}};
  const FitMeta& fm = model.fit_meta;
  const Hyperparameters& h = fm.hyper;
  doc["fit_meta"] = {{"iterations", fm.iterations},
                     {"final_delta", fm.final_delta},
                     {"epsilon", fm.epsilon},
                     {"converged", fm.converged},
                     {"seed", fm.seed},
                     {"pi_update", fm.pi_update == PiUpdate::Exact ? "exact" : "literal"},
                     {"hyperparameters",
                      {{"theta", vector_json(h.theta)},
                       {"a", matrix_json(h.a)},
                       {"b", matrix_json(h.b)},
                       {"u", matrix_json(h.u)},
                       {"v", matrix_json(h.v)},
                       {"alpha", matrix_json(h.alpha)},
                       {"beta", matrix_json(h.beta)}}}};
  return doc;
}

FittedModel model_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("schema_version")) throw std::runtime_error("model: missing schema_version");
  const int ver = doc.at("schema_version").get<int>();
  if (ver != kModelSchemaVersion)
    throw std::runtime_error("model: schema version " + std::to_string(ver) + " is not supported (expected " +
                             std::to_string(kModelSchemaVersion) + ")");
  try {
    FittedModel f;
    f.K = doc.at("K").get<std::size_t>();
    const auto M = doc.at("M").get<std::size_t>();
    for (const auto& c : doc.at("conditions")) {
      ConditionMeta cm;
      cm.code = c.at("code").get<std::string>();
      cm.name = c.at("name").get<std::string>();
      cm.sex_specific = c.at("sex_specific").get<std::string>() == "male_only" ? SexSpecific::MaleOnly : SexSpecific::None;
      cm.lifelong = c.at("lifelong").get<bool>();
      f.conditions.push_back(std::move(cm));
    }
    if (f.conditions.size() != M) throw std::runtime_error("model: condition count differs from M");
    f.theta_bar = vector_from(doc.at("theta_bar"), f.K, "theta_bar");
    f.pi_bar = matrix_from(doc.at("pi_bar"), M, f.K, "pi_bar");
    const auto& nig = doc.at("nig");
    f.u = matrix_from(nig.at("u"), M, f.K, "u");
    f.v = matrix_from(nig.at("v"), M, f.K, "v");
    f.alpha = matrix_from(nig.at("alpha"), M, f.K, "alpha");
    f.beta = matrix_from(nig.at("beta"), M, f.K, "beta");
    const auto& fm = doc.at("fit_meta");
    f.fit_meta.iterations = fm.at("iterations").get<int>();
    f.fit_meta.final_delta = fm.at("final_delta").get<double>();
    f.fit_meta.epsilon = fm.at("epsilon").get<double>();
    f.fit_meta.converged = fm.at("converged").get<bool>();
    f.fit_meta.seed = fm.at("seed").get<std::uint64_t>();
    f.fit_meta.pi_update = fm.at("pi_update").get<std::string>() == "literal" ? PiUpdate::Literal : PiUpdate::Exact;
    const auto& h = fm.at("hyperparameters");
    Hyperparameters& hp = f.fit_meta.hyper;
    hp.theta = vector_from(h.at("theta"), f.K, "theta");
    hp.a = matrix_from(h.at("a"), M, f.K, "a");
    hp.b = matrix_from(h.at("b"), M, f.K, "b");
    hp.u = matrix_from(h.at("u"), M, f.K, "u");
    hp.v = matrix_from(h.at("v"), M, f.K, "v");
    hp.alpha = matrix_from(h.at("alpha"), M, f.K, "alpha");
    hp.beta = matrix_from(h.at("beta"), M, f.K, "beta");
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t k = 0; k < f.K; ++k)
        if (!f.nig(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)).valid())
          throw std::runtime_error("model: invalid NIG parameters");
    return f;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model: ") + e.what());
  }
}

std::string serialize_model(const FittedModel& model) { return model_to_json(model).dump(1) + "\n"; }

void save_model(const FittedModel& model, const fs::path& path) { write_file(path, serialize_model(model)); }

FittedModel load_model(const fs::path& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // byte offset to line/column
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(path.string(), line, col, "malformed model document");
  }
  return model_from_json(doc);
}

std::map<std::string, std::string> parse_key_values(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParseError(origin, line, 1, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ParseError(origin, line, 1, "empty key");
    kv[key] = trim(s.substr(eq + 1));
  }
  return kv;
}

RunConfig apply_key_values(const std::map<std::string, std::string>& kv, RunConfig cfg) {
  auto num = [](const std::string& key, const std::string& v) {
    double x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x))
      throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + v + "'");
    return x;
  };
  auto count = [&](const std::string& key, const std::string& v) -> std::uint64_t {
    std::uint64_t x = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw std::invalid_argument("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
    return x;
  };
  for (const auto& [k, v] : kv) {
    if (k == "N") cfg.sim.N = count(k, v);
    else if (k == "M") cfg.sim.M = count(k, v);
    else if (k == "K") cfg.sim.K = count(k, v);
    else if (k == "weight_lo") cfg.sim.weight_lo = num(k, v);
    else if (k == "weight_hi") cfg.sim.weight_hi = num(k, v);
    else if (k == "prevalence_a") cfg.sim.prevalence_a = num(k, v);
    else if (k == "prevalence_b") cfg.sim.prevalence_b = num(k, v);
    else if (k == "onset_u") cfg.sim.onset.u = num(k, v);
    else if (k == "onset_v") cfg.sim.onset.v = num(k, v);
    else if (k == "onset_alpha") cfg.sim.onset.alpha = num(k, v);
    else if (k == "onset_beta") cfg.sim.onset.beta = num(k, v);
    else if (k == "baseline_lo") cfg.sim.baseline_lo = num(k, v);
    else if (k == "baseline_hi") cfg.sim.baseline_hi = num(k, v);
    else if (k == "followup_years") cfg.sim.followup_years = num(k, v);
    else if (k == "death_prob") cfg.sim.death_prob = num(k, v);
    else if (k == "train_fraction") cfg.sim.train_fraction = num(k, v);
    else if (k == "seed") cfg.sim.seed = count(k, v);
    else if (k == "prior_theta") cfg.prior.theta = num(k, v);
    else if (k == "prior_a") cfg.prior.a = num(k, v);
    else if (k == "prior_b") cfg.prior.b = num(k, v);
    else if (k == "prior_u") cfg.prior.nig.u = num(k, v);
    else if (k == "prior_v") cfg.prior.nig.v = num(k, v);
    else if (k == "prior_alpha") cfg.prior.nig.alpha = num(k, v);
    else if (k == "prior_beta") cfg.prior.nig.beta = num(k, v);
    else if (k == "fit_k") cfg.K = count(k, v);
    else if (k == "tol") cfg.tol = num(k, v);
    else if (k == "max_iter") cfg.max_iter = static_cast<int>(count(k, v));
    else if (k == "fit_seed") cfg.fit_seed = count(k, v);
    else if (k == "pi_update") {
      if (v == "exact") cfg.pi_update = PiUpdate::Exact;
      else if (v == "literal") cfg.pi_update = PiUpdate::Literal;
      else throw std::invalid_argument("config: pi_update must be 'exact' or 'literal'");
    } else {
      throw std::invalid_argument("config: unknown key '" + k + "'");
    }
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  return apply_key_values(parse_key_values(read_file(path), path.string()), std::move(base));
}

void save_truth(const SimResult& sim, const fs::path& dir) {
  fs::create_directories(dir);
  std::string labels = "split,id,cluster\n";
  for (std::size_t i = 0; i < sim.train.N(); ++i)
    labels += "train," + sim.train.individuals[i].id + "," + std::to_string(sim.train_labels[i]) + "\n";
  for (std::size_t i = 0; i < sim.test.N(); ++i)
    labels += "test," + sim.test.individuals[i].id + "," + std::to_string(sim.test_labels[i]) + "\n";
  write_file(dir / "truth_labels.csv", labels);
  json t;
  t["weights"] = vector_json(sim.truth.weights);
  t["pi"] = matrix_json(sim.truth.pi);
  t["mu"] = matrix_json(sim.truth.mu);
  t["sigma2"] = matrix_json(sim.truth.sigma2);
  t["mean_conditions"] = sim.mean_conditions;
  t["mean_recorded_conditions"] = sim.mean_recorded_conditions;
  write_file(dir / "truth_params.json", t.dump(1) + "\n");
}

}  // namespace accrual
