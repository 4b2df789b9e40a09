#include "pipeline.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include <json.hpp>

#include "diagnostics.hpp"
#include "econ.hpp"
#include "error.hpp"
#include "synthetic.hpp"
#include "table_io.hpp"

namespace hecon {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::vector<std::string> string_list(const json& v, const char* what) {
  if (v.is_string()) return {v.get<std::string>()};
  if (!v.is_array()) fail(ErrorCode::Config, std::string(what) + " must be a string or a list of strings");
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(e.get<std::string>());
  return out;
}

SensitivityScenario scenario_from_json(const json& v) {
  SensitivityScenario s;
  if (v.is_string()) {
    s.kind = scenario_kind_from_string(v.get<std::string>());
    if (s.kind == ScenarioKind::Degenerate)
      fail(ErrorCode::Config, "degenerate scenario needs shifts: {\"degenerate\": {\"u\": [...], \"c\": [...]}}");
    return s;
  }
  if (!v.is_object()) fail(ErrorCode::Config, "scenario entries must be names or objects");
  if (v.contains("degenerate")) {
    s.kind = ScenarioKind::Degenerate;
    s.delta_u = v.at("degenerate").at("u").get<std::vector<double>>();
    s.delta_c = v.at("degenerate").at("c").get<std::vector<double>>();
  } else if (v.contains("type")) {
    s.kind = scenario_kind_from_string(v.at("type").get<std::string>());
  } else {
    fail(ErrorCode::Config, "scenario object needs 'degenerate' or 'type'");
  }
  s.name = v.value("name", "");
  return s;
}

std::string group_key(int arm, GroupKind kind) { return "arm" + std::to_string(arm) + "_" + to_string(kind); }

std::string meta_line(const std::string& scenario, std::uint64_t seed, const std::string& extra = "") {
  std::string s = "# scenario=" + scenario + " seed=" + std::to_string(seed);
  if (!extra.empty()) s += " " + extra;
  return s + "\n";
}

std::string fmt(double v) { return format_double(v); }

json summary_stats(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const Interval h = hpd(v, 0.95);
  return {{"mean", m}, {"sd", v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0}, {"hpd95", {h.lo, h.hi}}};
}

struct Prepared {
  TrialDataset data;
  RescaledDataset rescaled;
  PatternTable patterns;
  double cost_floor = 1.0;
  std::optional<TruthSpec> truth;
};

std::optional<TruthSpec> load_truth(const RunConfig& cfg) {
  if (cfg.truth_inline) return truth_from_json(*cfg.truth_inline);
  if (cfg.truth_path) return truth_from_json(read_text_file(cfg.resolve(*cfg.truth_path)));
  return std::nullopt;
}

Prepared prepare(const RunConfig& cfg) {
  Prepared P;
  P.truth = load_truth(cfg);
  if (P.truth && P.truth->J != cfg.J) fail(ErrorCode::Config, "truth spec J differs from configuration J");
  if (cfg.dataset) {
    ParseOptions opt;
    opt.schema = cfg.schema;
    opt.time_unit_fractions = cfg.time_unit_fractions;
    opt.u_min_theory = cfg.u_min;
    opt.u_max_theory = cfg.u_max;
    P.data = load_trial_csv(cfg.resolve(*cfg.dataset), cfg.J, opt);
  } else if (P.truth) {
    P.data = generate_trial(*P.truth).observed;
  } else {
    fail(ErrorCode::Config, "configuration needs a 'dataset' path or a 'truth' spec");
  }
  P.data.validate(true);
  P.rescaled = rescale_utilities(P.data, cfg.rescale);
  P.patterns = classify_patterns(P.data);
  if (cfg.cost_floor) P.cost_floor = *cfg.cost_floor;
  else if (P.truth) P.cost_floor = P.truth->arms[0].cost_floor;
  else P.cost_floor = default_cost_floor(P.data);
  return P;
}

ChainConfig chain_for(const RunConfig& cfg, const std::string& key) {
  ChainConfig cc = cfg.chain;
  cc.seed = cfg.seed;
  std::set<std::string> names;
  for (const char* k : {"*"})
    if (auto it = cfg.zero_mask.find(k); it != cfg.zero_mask.end()) names.insert(it->second.begin(), it->second.end());
  if (auto it = cfg.zero_mask.find(key); it != cfg.zero_mask.end()) names.insert(it->second.begin(), it->second.end());
  cc.zero_mask.assign(names.begin(), names.end());
  return cc;
}

std::uint64_t fit_stream(CostFamily f, int arm, GroupKind kind) {
  return 100 * static_cast<std::uint64_t>(f) + 10 * static_cast<std::uint64_t>(arm) + static_cast<std::uint64_t>(kind);
}

class OutputSet {
 public:
  OutputSet(std::string root) : root_(std::move(root)) {}
  void write(const std::string& rel, const std::string& content) {
    write_text_file((fs::path(root_) / rel).string(), content);
    files_.push_back(rel);
  }
  const std::vector<std::string>& files() const { return files_; }
  const std::string& root() const { return root_; }

 private:
  std::string root_;
  std::vector<std::string> files_;
};

void update_manifest(const RunConfig& cfg, const CommandReport& rep) {
  const fs::path p = fs::path(cfg.out_dir()) / "manifest.json";
  json m = json::object();
  if (fs::exists(p)) {
    try {
      m = json::parse(read_text_file(p.string()));
    } catch (const json::exception&) {
      m = json::object();
    }
  }
  m["version"] = kVersion;
  m["seed"] = cfg.seed;
  m["commands"][rep.command] = {{"files", rep.files}, {"warnings", rep.warnings}};
  write_text_file(p.string(), m.dump(2) + "\n");
}

json group_summary_json(const PosteriorDraws& d, const GroupData& g) {
  json j;
  j["n_subjects"] = g.size();
  j["missing_cells"] = g.missing_cells();
  j["n_chains"] = d.n_chains();
  j["n_kept_per_chain"] = d.n_kept();
  json params = json::array();
  const auto sums = summarize(d);
  for (const auto& s : sums) {
    params.push_back({{"name", s.name},
                      {"mean", s.mean},
                      {"sd", s.sd},
                      {"hpd95", {s.hpd95.lo, s.hpd95.hi}},
                      {"rhat", s.pinned ? json(nullptr) : json(s.rhat)},
                      {"ess", s.pinned ? json(nullptr) : json(s.ess)},
                      {"acceptance", s.pinned ? json(nullptr) : json(s.acceptance)},
                      {"pinned", s.pinned}});
  }
  j["parameters"] = params;
  j["max_rhat"] = max_rhat(sums);
  j["warnings"] = d.warnings;
  return j;
}

struct LoadedFit {
  std::map<std::string, PosteriorDraws> groups;
  json meta;
};

LoadedFit load_fit(const RunConfig& cfg, CostFamily fam) {
  const fs::path dir = fs::path(cfg.out_dir()) / "fit" / to_string(fam);
  const fs::path meta_path = dir / "fit_meta.json";
  if (!fs::exists(meta_path))
    fail(ErrorCode::Dependency, "no fit found for cost family '" + to_string(fam) + "' (expected " + meta_path.string() +
                                    "); run fit with that family first");
  LoadedFit lf;
  lf.meta = json::parse(read_text_file(meta_path.string()));
  for (auto it = lf.meta.at("groups").begin(); it != lf.meta.at("groups").end(); ++it) {
    const json& g = it.value();
    PosteriorDraws d = draws_from_csv(read_text_file((dir / g.at("draws").get<std::string>()).string()), g.at("J").get<int>(),
                                      fam, g.at("cost_floor").get<double>());
    for (const auto& n : g.at("zero_mask")) d.zero_mask.insert(n.get<std::string>());
    for (const auto& n : g.at("pinned")) d.pinned.insert(n.get<std::string>());
    lf.groups.emplace(it.key(), std::move(d));
  }
  return lf;
}

bool arm_has_noncompleters(const Prepared& P, int arm) {
  for (const auto& s : P.data.subjects)
    if (s.arm == arm && !s.completer()) return true;
  return false;
}

std::string means_csv(const MarginalMeans& m, const std::string& label, std::uint64_t seed) {
  std::string out = meta_line(label, seed, "utility_scale=original");
  out += "draw,arm,time,outcome,value,scenario\n";
  for (int arm = 1; arm <= 2; ++arm) {
    const TimeMeans& t = m.arm(arm);
    for (std::size_t d = 0; d < t.n_draws(); ++d)
      for (std::size_t j = 0; j < t.u[d].size(); ++j) {
        const std::string prefix = std::to_string(d) + "," + std::to_string(arm) + "," + std::to_string(j) + ",";
        out += prefix + "u," + fmt(t.u[d][j]) + "," + label + "\n";
        out += prefix + "c," + fmt(t.c[d][j]) + "," + label + "\n";
      }
  }
  return out;
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  if (p.is_absolute()) return p.lexically_normal().string();
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void RunConfig::validate() const {
  if (J < 1) fail(ErrorCode::Config, "J must be at least 1");
  if (!time_unit_fractions.empty() && time_unit_fractions.size() != static_cast<std::size_t>(J))
    fail(ErrorCode::Config, "time_unit_fractions needs one entry per follow-up");
  if (families.empty()) fail(ErrorCode::Config, "at least one cost family is required");
  if (scenarios.empty()) fail(ErrorCode::Config, "at least one scenario is required");
  std::set<std::string> labels;
  for (const auto& s : scenarios) {
    s.validate(J);
    if (!labels.insert(s.label()).second) fail(ErrorCode::Config, "duplicate scenario label '" + s.label() + "'");
  }
  chain.validate();
  if (n_sims < 1) fail(ErrorCode::Config, "n_sims must be at least 1");
  if (M_bar < 1 || M_hat < 1) fail(ErrorCode::Config, "assess M_bar and M_hat must be positive");
  if (ppc_replicates < 1) fail(ErrorCode::Config, "ppc_replicates must be positive");
  if (!(u_max > u_min)) fail(ErrorCode::Config, "u_bounds must satisfy min < max");
  if (cost_floor && !(*cost_floor > 0.0)) fail(ErrorCode::Config, "cost_floor must be positive");
  k_grid(k_max, k_step);
}

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir, const std::string& overrides) {
  json j;
  try {
    j = json_text.empty() ? json::object() : json::parse(json_text);
    if (!overrides.empty()) {
      const json o = json::parse(overrides);
      if (!o.is_object()) fail(ErrorCode::Config, "overrides must be a JSON object");
      for (auto it = o.begin(); it != o.end(); ++it) j[it.key()] = it.value();
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("configuration JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Config, "configuration must be a JSON object");
  RunConfig c;
  c.base_dir = base_dir.empty() ? "." : base_dir;
  try {
    if (j.contains("dataset") && !j["dataset"].is_null()) c.dataset = j["dataset"].get<std::string>();
    if (j.contains("truth") && !j["truth"].is_null()) {
      if (j["truth"].is_string()) c.truth_path = j["truth"].get<std::string>();
      else c.truth_inline = j["truth"].dump();
    }
    c.J = j.value("J", 2);
    c.time_unit_fractions = j.value("time_unit_fractions", std::vector<double>{});
    if (j.contains("columns")) {
      const json& col = j["columns"];
      c.schema.id_column = col.value("id", c.schema.id_column);
      c.schema.arm_column = col.value("arm", c.schema.arm_column);
      c.schema.utility_columns = col.value("u", std::vector<std::string>{});
      c.schema.cost_columns = col.value("c", std::vector<std::string>{});
    }
    c.schema.missing = j.value("missing", c.schema.missing);
    const std::string rescale = j.value("rescale", "theoretical");
    if (rescale == "theoretical") c.rescale = RescaleMode::TheoreticalBounds;
    else if (rescale == "observed") c.rescale = RescaleMode::ObservedMinMax;
    else fail(ErrorCode::Config, "rescale must be 'theoretical' or 'observed'");
    if (j.contains("u_bounds")) {
      const auto b = j["u_bounds"].get<std::vector<double>>();
      if (b.size() != 2) fail(ErrorCode::Config, "u_bounds must be [min, max]");
      c.u_min = b[0];
      c.u_max = b[1];
    }
    if (j.contains("chain")) {
      const json& ch = j["chain"];
      c.chain.n_chains = ch.value("n_chains", c.chain.n_chains);
      c.chain.n_iter = ch.value("n_iter", c.chain.n_iter);
      c.chain.burn_in = ch.value("burn_in", c.chain.burn_in);
      c.chain.thin = ch.value("thin", c.chain.thin);
      c.chain.adapt_window = ch.value("adapt_window", c.chain.adapt_window);
      c.chain.target_accept = ch.value("target_accept", c.chain.target_accept);
      c.chain.keep_augmented = ch.value("keep_augmented", false);
      if (ch.contains("fixed")) c.chain.fixed = ch["fixed"].get<std::map<std::string, double>>();
      if (ch.contains("prior")) {
        c.chain.prior.coefficient_sd = ch["prior"].value("coefficient_sd", c.chain.prior.coefficient_sd);
        c.chain.prior.scale_max = ch["prior"].value("scale_max", c.chain.prior.scale_max);
      }
    }
    if (j.contains("families")) {
      c.families.clear();
      for (const auto& f : string_list(j["families"], "families")) c.families.push_back(cost_family_from_string(f));
    }
    if (j.contains("zero_mask")) {
      const json& z = j["zero_mask"];
      if (z.is_array()) c.zero_mask["*"] = string_list(z, "zero_mask");
      else
        for (auto it = z.begin(); it != z.end(); ++it) c.zero_mask[it.key()] = string_list(it.value(), "zero_mask");
    }
    if (j.contains("pattern_prior")) {
      const json& pp = j["pattern_prior"];
      const std::string type = pp.value("type", "structured");
      if (type == "structured") c.pattern_prior.type = PatternPrior::Type::Structured;
      else if (type == "flat") c.pattern_prior.type = PatternPrior::Type::Flat;
      else fail(ErrorCode::Config, "pattern_prior.type must be 'structured' or 'flat'");
      c.pattern_prior.x = pp.value("x", c.pattern_prior.x);
      c.pattern_prior.R_star = pp.value("R_star", c.pattern_prior.R_star);
    }
    if (j.contains("scenarios")) {
      const json& s = j["scenarios"];
      if (s.is_string()) c.scenarios.push_back(scenario_from_json(s));
      else
        for (const auto& e : s) c.scenarios.push_back(scenario_from_json(e));
    } else {
      for (const char* n : {"cc", "mar", "delta0", "flat", "skew0", "skew1"}) c.scenarios.push_back(scenario_from_json(n));
    }
    c.k_max = j.value("k_max", c.k_max);
    c.k_step = j.value("k_step", c.k_step);
    c.k_cep = j.value("k_cep", c.k_cep);
    c.n_sims = j.value("n_sims", c.n_sims);
    c.eval_draws = j.value("eval_draws", c.eval_draws);
    c.include_baseline_cost = j.value("include_baseline_cost", false);
    if (j.contains("cost_floor") && !j["cost_floor"].is_null()) c.cost_floor = j["cost_floor"].get<double>();
    if (j.contains("assess")) {
      const json& a = j["assess"];
      c.M_bar = a.value("M_bar", c.M_bar);
      c.M_hat = a.value("M_hat", c.M_hat);
      c.dic_draws = a.value("dic_draws", c.dic_draws);
      c.ppc_replicates = a.value("ppc_replicates", c.ppc_replicates);
    }
    c.out = j.value("out", c.out);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("configuration field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, const std::string& overrides) {
  if (path.empty()) return parse_run_config("", ".", overrides);
  if (!fs::exists(path)) fail(ErrorCode::Io, "configuration file not found: " + path);
  const std::string base = fs::path(path).parent_path().string();
  return parse_run_config(read_text_file(path), base.empty() ? "." : base, overrides);
}

std::string CommandReport::to_json() const {
  json j;
  j["command"] = command;
  j["out"] = out_dir;
  j["files"] = files;
  j["warnings"] = warnings;
  j["max_rhat"] = max_rhat;
  j["rhat_exceeded"] = rhat_exceeded;
  j["details"] = json::parse(details);
  return j.dump(2);
}

std::string draws_to_csv(const PosteriorDraws& d, const std::string& meta, const ChainConfig& cfg) {
  std::string out = meta;
  out += "iteration,chain";
  for (const auto& n : d.names) out += "," + n;
  out += "\n";
  for (std::size_t c = 0; c < d.n_chains(); ++c) {
    const DrawMatrix& m = d.chains[c];
    for (std::size_t r = 0; r < m.rows; ++r) {
      out += std::to_string(static_cast<std::size_t>(cfg.burn_in) + r * static_cast<std::size_t>(cfg.thin)) + "," +
             std::to_string(c);
      for (std::size_t k = 0; k < m.cols; ++k) out += "," + fmt(m.at(r, k));
      out += "\n";
    }
  }
  return out;
}

PosteriorDraws draws_from_csv(const std::string& text, int J, CostFamily family, double cost_floor) {
  std::istringstream in(text);
  const CsvTable t = read_csv(in);
  const ParamLayout layout(J);
  PosteriorDraws d;
  d.J = J;
  d.family = family;
  d.cost_floor = cost_floor;
  d.names = layout.names();
  const std::size_t chain_col = t.column("chain");
  if (chain_col == std::string::npos) fail(ErrorCode::Schema, "draws file lacks a 'chain' column");
  std::vector<std::size_t> cols;
  for (const auto& n : d.names) {
    const std::size_t c = t.column(n);
    if (c == std::string::npos) fail(ErrorCode::Schema, "draws file lacks parameter column '" + n + "'");
    cols.push_back(c);
  }
  std::vector<std::vector<double>> rows_by_chain;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto ch = parse_double(row.at(chain_col));
    if (!ch || *ch < 0) fail(ErrorCode::Parse, "draws file row " + std::to_string(r + 1) + ": bad chain index");
    const auto c = static_cast<std::size_t>(*ch);
    if (rows_by_chain.size() <= c) rows_by_chain.resize(c + 1);
    for (std::size_t k : cols) {
      const auto v = parse_double(row.at(k));
      if (!v) fail(ErrorCode::Parse, "draws file row " + std::to_string(r + 1) + ": cannot parse '" + row.at(k) + "'");
      rows_by_chain[c].push_back(*v);
    }
  }
  for (auto& flat : rows_by_chain) {
    DrawMatrix m(flat.size() / cols.size(), cols.size());
    m.data = std::move(flat);
    d.chains.push_back(std::move(m));
  }
  if (d.chains.empty()) fail(ErrorCode::Schema, "draws file has no rows");
  for (const auto& m : d.chains)
    if (m.rows != d.chains.front().rows) fail(ErrorCode::Schema, "chains in the draws file have different lengths");
  return d;
}

CommandReport cmd_simulate(const RunConfig& cfg) {
  const auto truth = load_truth(cfg);
  if (!truth) fail(ErrorCode::Config, "simulate needs a 'truth' spec");
  if (truth->J != cfg.J) fail(ErrorCode::Config, "truth spec J differs from configuration J");
  const SyntheticTrial trial = generate_trial(*truth);
  const TrueMeans tm = true_means(*truth, cfg.include_baseline_cost);
  OutputSet out(cfg.out_dir());
  auto csv = [&](const TrialDataset& d, const std::string& label) {
    std::ostringstream os;
    os << meta_line(label, truth->seed);
    write_trial_csv(os, d, cfg.schema);
    return os.str();
  };
  out.write("data/dataset.csv", csv(trial.observed, "observed"));
  out.write("data/full.csv", csv(trial.full, "full"));
  json j = json::parse(truth_to_json(*truth));
  json means;
  for (int a = 0; a < 2; ++a) {
    means[std::to_string(a + 1)] = {{"mu_u", tm.mu_u[a]}, {"se_u", tm.se_u[a]}, {"mu_c", tm.mu_c[a]},
                                    {"se_c", tm.se_c[a]}, {"mu_e", tm.mu_e[a]},  {"mu_c_total", tm.mu_c_total[a]}};
  }
  j["true_means"] = means;
  j["true_means"]["include_baseline_cost"] = cfg.include_baseline_cost;
  out.write("data/truth.json", j.dump(2) + "\n");
  CommandReport rep;
  rep.command = "simulate";
  rep.out_dir = out.root();
  rep.files = out.files();
  const PatternTable pt = classify_patterns(trial.observed);
  rep.details = json({{"n_subjects", trial.observed.subjects.size()}, {"patterns", json::parse(pattern_table_to_json(pt))}}).dump();
  update_manifest(cfg, rep);
  return rep;
}

CommandReport cmd_fit(const RunConfig& cfg) {
  const Prepared P = prepare(cfg);
  bool need_nc = false;
  for (const auto& s : cfg.scenarios) need_nc = need_nc || needs_noncompleters(s.kind);
  OutputSet out(cfg.out_dir());
  CommandReport rep;
  rep.command = "fit";
  rep.out_dir = out.root();
  json details;
  for (CostFamily fam : cfg.families) {
    const std::string fdir = "fit/" + to_string(fam) + "/";
    const std::string fam_tag = "family=" + to_string(fam);
    json summary, meta;
    meta["J"] = cfg.J;
    meta["cost_family"] = to_string(fam);
    meta["cost_floor"] = P.cost_floor;
    meta["rescale_min"] = P.rescaled.rescale_min;
    meta["rescale_max"] = P.rescaled.rescale_max;
    meta["patterns"] = json::parse(pattern_table_to_json(P.patterns));
    meta["chain"] = {{"n_chains", cfg.chain.n_chains}, {"n_iter", cfg.chain.n_iter}, {"burn_in", cfg.chain.burn_in},
                     {"thin", cfg.chain.thin},         {"seed", cfg.seed}};
    meta["groups"] = json::object();
    double fam_max = 1.0;
    for (int arm = 1; arm <= 2; ++arm) {
      for (GroupKind kind : {GroupKind::Completers, GroupKind::NonCompleters}) {
        if (kind == GroupKind::NonCompleters && !need_nc) continue;
        const GroupData g = make_group(P.rescaled, arm, kind, P.cost_floor);
        const std::string key = group_key(arm, kind);
        if (g.subjects.empty()) {
          if (kind == GroupKind::Completers) fail(ErrorCode::Validation, "arm " + std::to_string(arm) + " has no completers");
          rep.warnings.push_back(to_string(fam) + " " + key + ": group is empty, not fitted");
          continue;
        }
        const ChainConfig cc = chain_for(cfg, key);
        const PosteriorDraws d = fit_group(g, fam, cc, fit_stream(fam, arm, kind));
        for (const auto& w : d.warnings) rep.warnings.push_back(to_string(fam) + " " + key + ": " + w);
        const json gs = group_summary_json(d, g);
        summary[key] = gs;
        fam_max = std::max(fam_max, gs["max_rhat"].get<double>());
        const std::string file = key + "_draws.csv";
        out.write(fdir + file, draws_to_csv(d, meta_line("fit", cfg.seed, fam_tag + " group=" + key), cc));
        meta["groups"][key] = {{"draws", file},
                               {"J", d.J},
                               {"cost_floor", d.cost_floor},
                               {"zero_mask", std::vector<std::string>(d.zero_mask.begin(), d.zero_mask.end())},
                               {"pinned", std::vector<std::string>(d.pinned.begin(), d.pinned.end())},
                               {"n_subjects", g.size()}};
      }
    }
    const PsiPosterior psi = fit_pattern_probs(P.patterns, cfg.pattern_prior, 0, cfg.seed);
    json jp = json::array();
    for (const auto& a : psi.arms) {
      json cats = json::array();
      for (const auto& s : a.categories) cats.push_back(signature_string(s));
      jp.push_back({{"arm", a.arm},
                    {"categories", cats},
                    {"prior_concentration", a.prior_concentration},
                    {"posterior_concentration", a.posterior_concentration},
                    {"posterior_mean", a.posterior_mean()}});
    }
    out.write(fdir + "psi.json", json({{"arms", jp}}).dump(2) + "\n");
    summary["max_rhat"] = fam_max;
    out.write(fdir + "summary.json", summary.dump(2) + "\n");
    out.write(fdir + "fit_meta.json", meta.dump(2) + "\n");
    rep.max_rhat = std::max(rep.max_rhat, fam_max);
    details[to_string(fam)] = {{"max_rhat", fam_max}};
  }
  rep.rhat_exceeded = rep.max_rhat > 1.1;
  if (rep.rhat_exceeded) rep.warnings.push_back("some R-hat exceeds 1.1; chains may not have converged");
  rep.files = out.files();
  rep.details = details.dump();
  update_manifest(cfg, rep);
  return rep;
}

CommandReport cmd_evaluate(const RunConfig& cfg) {
  const Prepared P = prepare(cfg);
  const CostFamily fam = cfg.families.front();
  const LoadedFit fit = load_fit(cfg, fam);
  OutputSet out(cfg.out_dir());
  CommandReport rep;
  rep.command = "evaluate";
  rep.out_dir = out.root();

  bool need_nc = false;
  for (const auto& s : cfg.scenarios) need_nc = need_nc || needs_noncompleters(s.kind);
  bool need_model = false;
  for (const auto& s : cfg.scenarios) need_model = need_model || s.kind != ScenarioKind::CrossSectional;

  const PosteriorDraws* comp[2] = {nullptr, nullptr};
  const PosteriorDraws* nc[2] = {nullptr, nullptr};
  for (int arm = 1; arm <= 2; ++arm) {
    auto it = fit.groups.find(group_key(arm, GroupKind::Completers));
    if (it == fit.groups.end()) fail(ErrorCode::Dependency, "fit output lacks the arm " + std::to_string(arm) + " completer draws");
    comp[arm - 1] = &it->second;
    auto jt = fit.groups.find(group_key(arm, GroupKind::NonCompleters));
    if (jt != fit.groups.end()) nc[arm - 1] = &jt->second;
    if (need_nc && !nc[arm - 1] && arm_has_noncompleters(P, arm))
      fail(ErrorCode::Dependency, "scenario needs the non-completer fit for arm " + std::to_string(arm) +
                                      ", but only completers were fitted; rerun fit with a non-cc scenario");
  }

  const std::vector<double> ks = k_grid(cfg.k_max, cfg.k_step);
  const auto idx = thin_indices(comp[0]->total_draws(), cfg.eval_draws);
  const std::size_t n_eval = idx.size();
  TimeMeans comp_means[2], nc_means[2];
  ObservedShare shares[2];
  Calibration cal[2];
  PsiPosterior psi;
  if (need_model) {
    psi = fit_pattern_probs(P.patterns, cfg.pattern_prior, n_eval, cfg.seed);
    for (int arm = 1; arm <= 2; ++arm) {
      const int a = arm - 1;
      comp_means[a] = group_time_means(*comp[a], thin_indices(comp[a]->total_draws(), n_eval), cfg.n_sims, cfg.seed,
                                       10 * static_cast<std::uint64_t>(arm) + 1);
      if (need_nc && nc[a])
        nc_means[a] = group_time_means(*nc[a], thin_indices(nc[a]->total_draws(), n_eval), cfg.n_sims, cfg.seed,
                                       10 * static_cast<std::uint64_t>(arm) + 2);
      else
        nc_means[a] = comp_means[a];  // weight is exactly zero: the arm has no non-completers
      shares[a] = observed_shares(P.rescaled, arm);
      cal[a] = calibration_sds(P.rescaled, arm);
      if (need_nc && nc[a]) {
        for (const auto& w : shares[a].warnings) rep.warnings.push_back(w);
      }
    }
  }

  json details = json::object();
  for (const auto& scn : cfg.scenarios) {
    const std::string label = scn.label();
    const std::string dir = label + "/";
    ArmEcon econ[2];
    MarginalMeans mm;
    mm.scenario = label;
    json extra = json::object();
    if (scn.kind == ScenarioKind::CrossSectional) {
      const ComparatorResult cr = cross_sectional_comparator(P.data, n_eval, cfg.seed, cfg.include_baseline_cost);
      econ[0] = cr.arms[0];
      econ[1] = cr.arms[1];
      extra["coefficient_mean"] = cr.coefficient_mean;
      extra["covariates"] = {"intercept", "arm2", "u0_centred", "c0_centred"};
    } else {
      for (int arm = 1; arm <= 2; ++arm) {
        const int a = arm - 1;
        TimeMeans model;
        if (scn.kind == ScenarioKind::CompleteCase) {
          model = comp_means[a];
        } else if (scn.kind == ScenarioKind::Mar) {
          model = mix_means(psi.arm(arm).psi_completer, comp_means[a], nc_means[a]);
        } else {
          const TimeMeans restricted = restricted_group_means(nc_means[a], shares[a], scn, cal[a], cfg.seed, arm);
          model = mix_means(psi.arm(arm).psi_completer, comp_means[a], restricted);
        }
        mm.arms[a] = to_original_scale(model, P.rescaled);
        econ[a] = aggregate_qaly_cost(mm.arms[a], P.data.time_unit_fractions, cfg.include_baseline_cost);
      }
      flag_violations(mm, P.data.u_min_theory, P.data.u_max_theory);
      for (const auto& f : mm.flags) rep.warnings.push_back(label + ": " + f);
      out.write(dir + "means.csv", means_csv(mm, label, cfg.seed));
      if (uses_restriction(scn.kind)) {
        json cj = json::array();
        for (int a = 0; a < 2; ++a)
          cj.push_back({{"arm", a + 1}, {"sd_u_model_scale", cal[a].sd_u}, {"sd_c", cal[a].sd_c},
                        {"w_u", shares[a].w_u}, {"w_c", shares[a].w_c}});
        extra["calibration"] = cj;
      }
    }
    const EconSummary es = summarize_econ(econ[0], econ[1], ks);

    std::string ed = meta_line(label, cfg.seed, "family=" + to_string(fam));
    ed += "draw,mu_e_1,mu_c_1,mu_e_2,mu_c_2,delta_e,delta_c\n";
    for (std::size_t d = 0; d < es.delta_e.size(); ++d)
      ed += std::to_string(d) + "," + fmt(econ[0].mu_e[d]) + "," + fmt(econ[0].mu_c[d]) + "," + fmt(econ[1].mu_e[d]) + "," +
            fmt(econ[1].mu_c[d]) + "," + fmt(es.delta_e[d]) + "," + fmt(es.delta_c[d]) + "\n";
    out.write(dir + "econ_draws.csv", ed);

    std::string cc = meta_line(label, cfg.seed, "family=" + to_string(fam));
    cc += "k,probability,scenario\n";
    for (const auto& p : es.ceac) cc += fmt(p.k) + "," + fmt(p.probability) + "," + label + "\n";
    out.write(dir + "ceac.csv", cc);

    const auto cep = cep_export(es.delta_e, es.delta_c, cfg.k_cep);
    std::string cp = meta_line(label, cfg.seed, "family=" + to_string(fam) + " k=" + fmt(cfg.k_cep));
    cp += "draw,delta_e,delta_c,in_area,scenario\n";
    for (std::size_t d = 0; d < cep.size(); ++d)
      cp += std::to_string(d) + "," + fmt(cep[d].delta_e) + "," + fmt(cep[d].delta_c) + "," + (cep[d].in_area ? "1" : "0") +
            "," + label + "\n";
    out.write(dir + "cep.csv", cp);

    std::size_t in_area = 0;
    for (const auto& p : cep) in_area += p.in_area;
    json s;
    s["scenario"] = label;
    s["seed"] = cfg.seed;
    s["cost_family"] = to_string(fam);
    s["n_draws"] = es.delta_e.size();
    s["icer"] = es.icer;
    s["delta_e"] = summary_stats(es.delta_e);
    s["delta_c"] = summary_stats(es.delta_c);
    s["k_cep"] = cfg.k_cep;
    s["prob_cost_effective_at_k_cep"] = static_cast<double>(in_area) / static_cast<double>(cep.size());
    json arms = json::array();
    for (int a = 0; a < 2; ++a) {
      json ja = {{"arm", a + 1}, {"mu_e", summary_stats(econ[a].mu_e)}, {"mu_c", summary_stats(econ[a].mu_c)}};
      if (scn.kind != ScenarioKind::CrossSectional) {
        json times = json::array();
        for (std::size_t j = 0; j < mm.arms[a].u.front().size(); ++j) {
          std::vector<double> u, c;
          for (std::size_t d = 0; d < mm.arms[a].n_draws(); ++d) {
            u.push_back(mm.arms[a].u[d][j]);
            c.push_back(mm.arms[a].c[d][j]);
          }
          times.push_back({{"time", j}, {"mu_u", summary_stats(u)}, {"mu_c", summary_stats(c)}});
        }
        ja["per_time"] = times;
      }
      arms.push_back(ja);
    }
    s["arms"] = arms;
    s["flags"] = mm.flags;
    s["extra"] = extra;
    out.write(dir + "summary.json", s.dump(2) + "\n");
    details[label] = {{"icer", es.icer}, {"delta_e_mean", s["delta_e"]["mean"]}, {"delta_c_mean", s["delta_c"]["mean"]}};
  }
  rep.files = out.files();
  rep.details = details.dump();
  update_manifest(cfg, rep);
  return rep;
}

CommandReport cmd_assess(const RunConfig& cfg) {
  const Prepared P = prepare(cfg);
  OutputSet out(cfg.out_dir());
  CommandReport rep;
  rep.command = "assess";
  rep.out_dir = out.root();
  json reports = json::array();
  std::optional<std::pair<double, std::string>> best;
  std::map<CostFamily, LoadedFit> fits;
  for (CostFamily fam : cfg.families) {
    fits.emplace(fam, load_fit(cfg, fam));
    const LoadedFit& fit = fits.at(fam);
    DicReport total;
    json groups = json::object();
    for (int arm = 1; arm <= 2; ++arm)
      for (GroupKind kind : {GroupKind::Completers, GroupKind::NonCompleters}) {
        const std::string key = group_key(arm, kind);
        auto it = fit.groups.find(key);
        if (it == fit.groups.end()) {
          if (kind == GroupKind::NonCompleters && arm_has_noncompleters(P, arm))
            rep.warnings.push_back(to_string(fam) + ": no non-completer fit for arm " + std::to_string(arm) +
                                   "; DIC covers completers only");
          continue;
        }
        DicSettings ds;
        ds.M_bar = cfg.M_bar;
        ds.M_hat = cfg.M_hat;
        ds.max_draws = cfg.dic_draws;
        ds.seed = cfg.seed;
        ds.stream_id = 10 * static_cast<std::uint64_t>(arm) + static_cast<std::uint64_t>(kind);
        const DicReport r = dic(it->second, make_group(P.rescaled, arm, kind, P.cost_floor), ds);
        groups[key] = {{"dic", r.total.dic}, {"p_d", r.total.p_d}};
        total.accumulate(r);
      }
    for (const auto& w : total.warnings) rep.warnings.push_back(to_string(fam) + ": " + w);
    json blocks = json::array();
    for (const auto& b : total.blocks)
      blocks.push_back({{"block", b.name}, {"dic", b.dic}, {"p_d", b.p_d}, {"d_bar", b.d_bar}, {"d_hat", b.d_hat}});
    reports.push_back({{"cost_family", to_string(fam)},
                       {"M_bar", total.M_bar},
                       {"M_hat", total.M_hat},
                       {"n_draws", total.n_draws},
                       {"blocks", blocks},
                       {"total", {{"dic", total.total.dic}, {"p_d", total.total.p_d}, {"d_bar", total.total.d_bar}, {"d_hat", total.total.d_hat}}},
                       {"groups", groups},
                       {"warnings", total.warnings}});
    if (!best || total.total.dic < best->first) best = {total.total.dic, to_string(fam)};
  }
  json dj = {{"seed", cfg.seed}, {"families", reports}};
  if (cfg.families.size() >= 2) dj["lower_total_dic"] = best->second;
  out.write("assess/dic.json", dj.dump(2) + "\n");

  const CostFamily fam = cfg.families.front();
  const LoadedFit& fit = fits.at(fam);
  FittedArm arms[2];
  for (int arm = 1; arm <= 2; ++arm) {
    auto it = fit.groups.find(group_key(arm, GroupKind::Completers));
    if (it == fit.groups.end()) fail(ErrorCode::Dependency, "assess needs the completer fits");
    arms[arm - 1].completers = &it->second;
    auto jt = fit.groups.find(group_key(arm, GroupKind::NonCompleters));
    if (jt != fit.groups.end()) arms[arm - 1].noncompleters = &jt->second;
  }
  const PsiPosterior psi = fit_pattern_probs(P.patterns, cfg.pattern_prior, 0, cfg.seed);
  const PpcReport ppc = rank_corr_check(arms, psi, P.rescaled.base, cfg.ppc_replicates, cfg.seed);
  std::string csv = meta_line("ppc", cfg.seed, "family=" + to_string(fam));
  csv += "arm,pair,replicate,value\n";
  json pairs = json::array();
  std::size_t below = 0, counted = 0;
  for (const auto& p : ppc.pairs) {
    const std::string name = p.a + "-" + p.b;
    for (std::size_t r = 0; r < p.replicated.size(); ++r)
      csv += std::to_string(p.arm) + "," + name + "," + std::to_string(r) + "," +
             (std::isnan(p.replicated[r]) ? std::string("NA") : fmt(p.replicated[r])) + "\n";
    pairs.push_back({{"arm", p.arm},
                     {"pair", name},
                     {"observed", p.skipped ? json(nullptr) : json(p.observed)},
                     {"p_value", p.skipped ? json(nullptr) : json(p.p_value)},
                     {"skipped", p.skipped}});
    if (!p.skipped) {
      ++counted;
      below += p.p_value < 0.05;
    }
  }
  out.write("assess/ppc.csv", csv);
  out.write("assess/ppc_summary.json",
            json({{"seed", cfg.seed},
                  {"cost_family", to_string(fam)},
                  {"n_replicates", ppc.n_replicates},
                  {"pairs", pairs},
                  {"share_p_below_0_05", counted ? static_cast<double>(below) / static_cast<double>(counted) : 0.0},
                  {"notices", ppc.notices}})
                    .dump(2) +
                "\n");
  for (const auto& n : ppc.notices) rep.warnings.push_back(n);
  rep.files = out.files();
  rep.details = json({{"lower_total_dic", cfg.families.size() >= 2 ? json(best->second) : json(nullptr)}}).dump();
  update_manifest(cfg, rep);
  return rep;
}

CommandReport run_command(const std::string& name, const RunConfig& cfg) {
  if (name == "simulate") return cmd_simulate(cfg);
  if (name == "fit") return cmd_fit(cfg);
  if (name == "evaluate") return cmd_evaluate(cfg);
  if (name == "assess") return cmd_assess(cfg);
  fail(ErrorCode::InvalidArgument, "unknown command '" + name + "' (expected simulate, fit, evaluate or assess)");
}

}  // namespace hecon
