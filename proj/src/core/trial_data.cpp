#include "trial_data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "error.hpp"
#include "table_io.hpp"

namespace hecon {

using nlohmann::json;

Signature SubjectRecord::signature() const {
  Signature s;
  s.reserve(utilities.size() * 2);
  for (std::size_t j = 0; j < utilities.size(); ++j) {
    s.push_back(utilities[j].has_value());
    s.push_back(costs[j].has_value());
  }
  return s;
}

bool SubjectRecord::completer() const {
  for (std::size_t j = 0; j < utilities.size(); ++j)
    if (!utilities[j] || !costs[j]) return false;
  return true;
}

std::size_t TrialDataset::arm_size(int arm) const {
  return static_cast<std::size_t>(
      std::count_if(subjects.begin(), subjects.end(), [&](const SubjectRecord& s) { return s.arm == arm; }));
}

void TrialDataset::validate(bool require_both_arms) const {
  if (J < 1) fail(ErrorCode::Validation, "J must be at least 1");
  if (time_unit_fractions.size() != static_cast<std::size_t>(J))
    fail(ErrorCode::Validation, "expected " + std::to_string(J) + " time-unit fractions");
  double total = 0.0;
  for (double d : time_unit_fractions) {
    if (!(d > 0.0)) fail(ErrorCode::Validation, "time-unit fractions must be positive");
    total += d;
  }
  if (total > 1.0 + 1e-12) fail(ErrorCode::Validation, "time-unit fractions sum above 1");
  if (!(u_min_theory < u_max_theory)) fail(ErrorCode::Validation, "instrument bounds are not ordered");
  for (const auto& s : subjects) {
    if (s.utilities.size() != static_cast<std::size_t>(J + 1) || s.costs.size() != static_cast<std::size_t>(J + 1))
      fail(ErrorCode::Validation, "subject " + s.id + " does not have J+1 measurements");
    if (s.arm != 1 && s.arm != 2) fail(ErrorCode::Validation, "subject " + s.id + " has arm outside {1,2}");
    for (int j = 0; j <= J; ++j) {
      const auto& u = s.utilities[static_cast<std::size_t>(j)];
      const auto& c = s.costs[static_cast<std::size_t>(j)];
      if (u && (!std::isfinite(*u) || *u < u_min_theory || *u > u_max_theory))
        fail(ErrorCode::Validation, "subject " + s.id + ": utility u" + std::to_string(j) + "=" + format_double(*u) +
                                        " outside instrument bounds [" + format_double(u_min_theory) + ", " +
                                        format_double(u_max_theory) + "]");
      if (c && (!std::isfinite(*c) || *c < 0.0))
        fail(ErrorCode::Validation, "subject " + s.id + ": cost c" + std::to_string(j) + " is negative");
    }
  }
  if (require_both_arms && (arm_size(1) == 0 || arm_size(2) == 0))
    fail(ErrorCode::Validation, "each arm needs at least one subject");
}

TrialDataset TrialDataset::filtered(int arm) const {
  TrialDataset out = *this;
  out.subjects.clear();
  for (const auto& s : subjects)
    if (s.arm == arm) out.subjects.push_back(s);
  return out;
}

std::string CsvSchema::utility_column(int j) const {
  if (!utility_columns.empty()) return utility_columns.at(static_cast<std::size_t>(j));
  return "u" + std::to_string(j);
}

std::string CsvSchema::cost_column(int j) const {
  if (!cost_columns.empty()) return cost_columns.at(static_cast<std::size_t>(j));
  return "c" + std::to_string(j);
}

namespace {

std::vector<double> default_fractions(int J, const std::vector<double>& given) {
  if (!given.empty()) return given;
  return std::vector<double>(static_cast<std::size_t>(J), 1.0 / J);
}

}  // namespace

TrialDataset parse_trial_csv(std::istream& source, int J, const ParseOptions& options) {
  const auto& schema = options.schema;
  CsvTable table = read_csv(source);

  auto require = [&](const std::string& name) {
    const auto idx = table.column(name);
    if (idx == std::string::npos) fail(ErrorCode::Schema, "missing required column '" + name + "'");
    return idx;
  };
  const auto id_col = require(schema.id_column);
  const auto arm_col = require(schema.arm_column);
  std::vector<std::size_t> u_cols, c_cols;
  for (int j = 0; j <= J; ++j) {
    u_cols.push_back(require(schema.utility_column(j)));
    c_cols.push_back(require(schema.cost_column(j)));
  }

  TrialDataset data;
  data.J = J;
  data.time_unit_fractions = default_fractions(J, options.time_unit_fractions);
  data.u_min_theory = options.u_min_theory;
  data.u_max_theory = options.u_max_theory;

  std::size_t row_no = 0;
  for (const auto& row : table.rows) {
    ++row_no;
    if (row.size() != table.header.size())
      fail(ErrorCode::Parse, "row " + std::to_string(row_no) + ": expected " + std::to_string(table.header.size()) +
                                 " cells, found " + std::to_string(row.size()));
    auto cell = [&](std::size_t col) -> std::optional<double> {
      const std::string& text = row[col];
      if (text.empty() || text == schema.missing) return std::nullopt;
      auto v = parse_double(text);
      if (!v)
        fail(ErrorCode::Parse, "row " + std::to_string(row_no) + ", column " + table.header[col] +
                                   ": cannot parse '" + text + "' as a number");
      return v;
    };
    SubjectRecord s;
    s.id = row[id_col];
    const auto arm = parse_double(row[arm_col]);
    if (!arm || (*arm != 1.0 && *arm != 2.0))
      fail(ErrorCode::Parse, "row " + std::to_string(row_no) + ", column " + schema.arm_column +
                                 ": arm must be 1 or 2, found '" + row[arm_col] + "'");
    s.arm = static_cast<int>(*arm);
    for (int j = 0; j <= J; ++j) {
      s.utilities.push_back(cell(u_cols[static_cast<std::size_t>(j)]));
      s.costs.push_back(cell(c_cols[static_cast<std::size_t>(j)]));
    }
    data.subjects.push_back(std::move(s));
  }
  data.validate(false);
  return data;
}

TrialDataset parse_trial_csv_text(const std::string& text, int J, const ParseOptions& options) {
  std::istringstream in(text);
  return parse_trial_csv(in, J, options);
}

TrialDataset load_trial_csv(const std::string& path, int J, const ParseOptions& options) {
  std::istringstream in(read_text_file(path));
  return parse_trial_csv(in, J, options);
}

void write_trial_csv(std::ostream& out, const TrialDataset& data, const CsvSchema& schema) {
  out << schema.id_column << ',' << schema.arm_column;
  for (int j = 0; j <= data.J; ++j) out << ',' << schema.utility_column(j);
  for (int j = 0; j <= data.J; ++j) out << ',' << schema.cost_column(j);
  out << '\n';
  auto put = [&](const std::optional<double>& v) { out << ',' << (v ? format_double(*v) : schema.missing); };
  for (const auto& s : data.subjects) {
    out << s.id << ',' << s.arm;
    for (const auto& u : s.utilities) put(u);
    for (const auto& c : s.costs) put(c);
    out << '\n';
  }
}

std::string trial_to_json(const TrialDataset& data) {
  json j;
  j["J"] = data.J;
  j["time_unit_fractions"] = data.time_unit_fractions;
  j["u_min_theory"] = data.u_min_theory;
  j["u_max_theory"] = data.u_max_theory;
  json subjects = json::array();
  for (const auto& s : data.subjects) {
    json js;
    js["id"] = s.id;
    js["arm"] = s.arm;
    json u = json::array(), c = json::array(), mask = json::array();
    for (int t = 0; t <= data.J; ++t) {
      const auto& uv = s.utilities[static_cast<std::size_t>(t)];
      const auto& cv = s.costs[static_cast<std::size_t>(t)];
      u.push_back(uv ? json(*uv) : json(nullptr));
      c.push_back(cv ? json(*cv) : json(nullptr));
      mask.push_back(json::array({uv ? 1 : 0, cv ? 1 : 0}));
    }
    js["u"] = u;
    js["c"] = c;
    js["mask"] = mask;
    subjects.push_back(js);
  }
  j["subjects"] = subjects;
  return j.dump();
}

TrialDataset trial_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("dataset JSON: ") + e.what());
  }
  TrialDataset data;
  try {
    data.J = j.at("J").get<int>();
    data.time_unit_fractions = j.at("time_unit_fractions").get<std::vector<double>>();
    data.u_min_theory = j.value("u_min_theory", kEq5dFloor);
    data.u_max_theory = j.value("u_max_theory", kEq5dCeiling);
    for (const auto& js : j.at("subjects")) {
      SubjectRecord s;
      s.id = js.at("id").get<std::string>();
      s.arm = js.at("arm").get<int>();
      const auto& u = js.at("u");
      const auto& c = js.at("c");
      const auto& mask = js.at("mask");
      for (int t = 0; t <= data.J; ++t) {
        const auto& m = mask.at(static_cast<std::size_t>(t));
        const bool ru = m.at(0).get<int>() == 1, rc = m.at(1).get<int>() == 1;
        const auto& uv = u.at(static_cast<std::size_t>(t));
        const auto& cv = c.at(static_cast<std::size_t>(t));
        if (ru != !uv.is_null() || rc != !cv.is_null())
          fail(ErrorCode::Validation, "subject " + s.id + ": mask disagrees with value presence");
        s.utilities.push_back(ru ? std::optional<double>(uv.get<double>()) : std::nullopt);
        s.costs.push_back(rc ? std::optional<double>(cv.get<double>()) : std::nullopt);
      }
      data.subjects.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, std::string("dataset JSON: ") + e.what());
  }
  data.validate(false);
  return data;
}

const PatternEntry* ArmPatterns::completer_entry() const {
  for (const auto& p : patterns)
    if (p.completer) return &p;
  return nullptr;
}

PatternTable classify_patterns(const TrialDataset& data) {
  PatternTable table;
  table.J = data.J;
  for (int t = 1; t <= 2; ++t) {
    struct Acc {
      std::size_t n = 0;
      std::vector<double> su, sc;
      std::vector<std::size_t> nu, nc;
    };
    std::map<Signature, Acc, std::greater<>> groups;
    ArmPatterns& arm = table.arms[t - 1];
    arm.arm = t;
    for (const auto& s : data.subjects) {
      if (s.arm != t) continue;
      ++arm.n_subjects;
      auto& acc = groups[s.signature()];
      const auto n_times = static_cast<std::size_t>(data.J + 1);
      if (acc.n == 0) {
        acc.su.assign(n_times, 0.0);
        acc.sc.assign(n_times, 0.0);
        acc.nu.assign(n_times, 0);
        acc.nc.assign(n_times, 0);
      }
      ++acc.n;
      for (std::size_t j = 0; j < n_times; ++j) {
        if (s.utilities[j]) {
          acc.su[j] += *s.utilities[j];
          ++acc.nu[j];
        }
        if (s.costs[j]) {
          acc.sc[j] += *s.costs[j];
          ++acc.nc[j];
        }
      }
    }
    for (const auto& [sig, acc] : groups) {
      PatternEntry e;
      e.signature = sig;
      e.count = acc.n;
      e.completer = std::all_of(sig.begin(), sig.end(), [](bool b) { return b; });
      for (std::size_t j = 0; j < acc.su.size(); ++j) {
        e.mean_u.push_back(acc.nu[j] ? std::optional<double>(acc.su[j] / static_cast<double>(acc.nu[j])) : std::nullopt);
        e.mean_c.push_back(acc.nc[j] ? std::optional<double>(acc.sc[j] / static_cast<double>(acc.nc[j])) : std::nullopt);
      }
      arm.patterns.push_back(std::move(e));
    }
  }
  return table;
}

std::string signature_string(const Signature& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i > 0) out += (i % 2 == 0) ? ';' : ',';
    out += s[i] ? '1' : '0';
  }
  return out;
}

std::string pattern_table_to_json(const PatternTable& table) {
  json j;
  j["J"] = table.J;
  json arms = json::array();
  for (const auto& arm : table.arms) {
    json ja;
    ja["arm"] = arm.arm;
    ja["n_subjects"] = arm.n_subjects;
    ja["R"] = arm.R();
    json pats = json::array();
    for (const auto& p : arm.patterns) {
      json jp;
      jp["signature"] = signature_string(p.signature);
      jp["count"] = p.count;
      jp["completer"] = p.completer;
      json mu = json::array(), mc = json::array();
      for (std::size_t t = 0; t < p.mean_u.size(); ++t) {
        mu.push_back(p.mean_u[t] ? json(*p.mean_u[t]) : json(nullptr));
        mc.push_back(p.mean_c[t] ? json(*p.mean_c[t]) : json(nullptr));
      }
      jp["mean_u"] = mu;
      jp["mean_c"] = mc;
      pats.push_back(jp);
    }
    ja["patterns"] = pats;
    arms.push_back(ja);
  }
  j["arms"] = arms;
  return j.dump();
}

double RescaledDataset::to_original(int j, double u_star) const {
  return u_star * span(j) + rescale_min[static_cast<std::size_t>(j)];
}

double RescaledDataset::to_model(int j, double u) const {
  return (u - rescale_min[static_cast<std::size_t>(j)]) / span(j);
}

RescaledDataset rescale_utilities(const TrialDataset& data, RescaleMode mode) {
  RescaledDataset out;
  out.mode = mode;
  out.base = data;
  out.original_u_min = data.u_min_theory;
  out.original_u_max = data.u_max_theory;
  const auto n_times = static_cast<std::size_t>(data.J + 1);
  out.rescale_min.assign(n_times, data.u_min_theory);
  out.rescale_max.assign(n_times, data.u_max_theory);
  out.structural_one_preserved.assign(n_times, true);
  if (mode == RescaleMode::ObservedMinMax) {
    for (std::size_t j = 0; j < n_times; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& s : data.subjects)
        if (s.utilities[j]) {
          lo = std::min(lo, *s.utilities[j]);
          hi = std::max(hi, *s.utilities[j]);
        }
      if (!(hi > lo))
        fail(ErrorCode::Validation, "utility rescaling: time " + std::to_string(j) +
                                        " has fewer than two distinct observed values");
      out.rescale_min[j] = lo;
      out.rescale_max[j] = hi;
      out.structural_one_preserved[j] = (hi == data.u_max_theory);
    }
  }
  for (auto& s : out.base.subjects)
    for (std::size_t j = 0; j < n_times; ++j)
      if (s.utilities[j]) {
        const double u = *s.utilities[j];
        s.utilities[j] = (u == out.rescale_max[j]) ? 1.0 : (u - out.rescale_min[j]) / (out.rescale_max[j] - out.rescale_min[j]);
      }
  out.base.u_min_theory = 0.0;
  out.base.u_max_theory = 1.0;
  return out;
}

TrialDataset invert_rescaling(const RescaledDataset& data) {
  TrialDataset out = data.base;
  out.u_min_theory = data.original_u_min;
  out.u_max_theory = data.original_u_max;
  const auto n_times = static_cast<std::size_t>(data.base.J + 1);
  for (auto& s : out.subjects)
    for (std::size_t j = 0; j < n_times; ++j)
      if (s.utilities[j]) s.utilities[j] = data.to_original(static_cast<int>(j), *s.utilities[j]);
  return out;
}

CompletionSplit split_by_completion(const TrialDataset& data) {
  CompletionSplit split{data, data};
  split.completers.subjects.clear();
  split.noncompleters.subjects.clear();
  for (const auto& s : data.subjects) (s.completer() ? split.completers : split.noncompleters).subjects.push_back(s);
  return split;
}

double default_cost_floor(const TrialDataset& data) {
  double smallest = INFINITY;
  for (const auto& s : data.subjects)
    for (const auto& c : s.costs)
      if (c && *c > 0.0) smallest = std::min(smallest, *c);
  return std::isfinite(smallest) ? 0.5 * smallest : 1.0;
}

}  // namespace hecon
