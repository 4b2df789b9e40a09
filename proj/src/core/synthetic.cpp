#include "synthetic.hpp"

#include <cmath>

#include <json.hpp>

#include "diagnostics.hpp"
#include "econ.hpp"
#include "error.hpp"

namespace hecon {

using nlohmann::json;

void Missingness::validate() const {
  if (!(rate >= 0.0 && rate <= 1.0)) fail(ErrorCode::Config, "MCAR rate must lie in [0,1]");
  for (double v : {intercept, log_c0_coef, u_coef, log_c_coef})
    if (!std::isfinite(v)) fail(ErrorCode::Config, "missingness coefficients must be finite");
}

void TruthSpec::validate() const {
  if (J < 1) fail(ErrorCode::Config, "truth J must be at least 1");
  if (n_per_arm < 1) fail(ErrorCode::Config, "truth n_per_arm must be positive");
  if (time_unit_fractions.size() != static_cast<std::size_t>(J))
    fail(ErrorCode::Config, "truth needs one time-unit fraction per follow-up");
  if (!(u_max > u_min)) fail(ErrorCode::Config, "truth utility bounds must satisfy u_min < u_max");
  if (truth_sims < 1) fail(ErrorCode::Config, "truth_sims must be positive");
  for (const auto& p : arms) {
    if (p.J != J) fail(ErrorCode::Config, "truth arm parameters must share J");
    p.validate();
  }
  missingness.validate();
}

namespace {

Missingness missingness_from_json(const json& m) {
  Missingness out;
  const std::string type = m.value("type", "mcar");
  if (type == "mcar") out.type = Missingness::Type::MCAR;
  else if (type == "mar") out.type = Missingness::Type::MAR;
  else if (type == "mnar") out.type = Missingness::Type::MNAR;
  else fail(ErrorCode::Config, "unknown missingness type '" + type + "' (expected mcar, mar or mnar)");
  out.rate = m.value("rate", 0.0);
  out.intercept = m.value("intercept", 0.0);
  out.log_c0_coef = m.value("log_c0_coef", 0.0);
  out.u_coef = m.value("u_coef", 0.0);
  out.log_c_coef = m.value("log_c_coef", 0.0);
  out.joint = m.value("joint", false);
  return out;
}

}  // namespace

TruthSpec truth_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("truth spec JSON: ") + e.what());
  }
  try {
    TruthSpec s;
    s.J = j.value("J", 2);
    s.n_per_arm = j.value("n_per_arm", std::size_t{500});
    s.time_unit_fractions = j.value("time_unit_fractions", std::vector<double>(static_cast<std::size_t>(s.J), 1.0 / s.J));
    s.u_min = j.value("u_min", kEq5dFloor);
    s.u_max = j.value("u_max", kEq5dCeiling);
    s.seed = j.value("seed", std::uint64_t{1});
    s.truth_sims = j.value("truth_sims", 1000000);
    const std::string family = j.value("cost_family", "lognormal");
    const double floor = j.value("cost_floor", 1.0);
    if (!j.contains("arms")) fail(ErrorCode::Schema, "truth spec needs an 'arms' object with entries '1' and '2'");
    const ParamLayout layout(s.J);
    for (int a = 1; a <= 2; ++a) {
      const std::string key = std::to_string(a);
      if (!j.at("arms").contains(key)) fail(ErrorCode::Schema, "truth spec is missing arm " + key);
      json arm = j.at("arms").at(key);
      std::vector<std::string> missing;
      const json& coef = arm.contains("coefficients") ? arm.at("coefficients") : arm;
      for (const auto& name : layout.names())
        if (!coef.contains(name)) missing.push_back(name);
      if (!missing.empty()) {
        std::string list;
        for (const auto& n : missing) list += (list.empty() ? "" : ", ") + n;
        fail(ErrorCode::Schema, "truth arm " + key + " lacks parameters: " + list);
      }
      if (!arm.contains("J")) arm["J"] = s.J;
      if (!arm.contains("cost_family")) arm["cost_family"] = family;
      if (!arm.contains("cost_floor")) arm["cost_floor"] = floor;
      s.arms[a - 1] = params_from_json(arm.dump());
    }
    if (j.contains("missingness")) s.missingness = missingness_from_json(j.at("missingness"));
    s.validate();
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, std::string("truth spec JSON: ") + e.what());
  }
}

std::string truth_to_json(const TruthSpec& s) {
  json j;
  j["J"] = s.J;
  j["n_per_arm"] = s.n_per_arm;
  j["time_unit_fractions"] = s.time_unit_fractions;
  j["u_min"] = s.u_min;
  j["u_max"] = s.u_max;
  j["seed"] = s.seed;
  j["truth_sims"] = s.truth_sims;
  j["cost_family"] = to_string(s.arms[0].family);
  j["cost_floor"] = s.arms[0].cost_floor;
  for (int a = 0; a < 2; ++a) j["arms"][std::to_string(a + 1)] = json::parse(params_to_json(s.arms[a]));
  const auto& m = s.missingness;
  j["missingness"] = {{"type", m.type == Missingness::Type::MCAR ? "mcar" : m.type == Missingness::Type::MAR ? "mar" : "mnar"},
                      {"rate", m.rate},
                      {"intercept", m.intercept},
                      {"log_c0_coef", m.log_c0_coef},
                      {"u_coef", m.u_coef},
                      {"log_c_coef", m.log_c_coef},
                      {"joint", m.joint}};
  return j.dump(2);
}

TrueMeans true_means(const TruthSpec& spec, bool include_baseline_cost) {
  spec.validate();
  TrueMeans t;
  const double span = spec.u_max - spec.u_min;
  for (int a = 0; a < 2; ++a) {
    const HurdleParams& p = spec.arms[a];
    Rng rng = make_rng(spec.seed, Stream::Truth, {static_cast<std::uint64_t>(a + 1)});
    const MarginalMoments mm = marginal_mean_by_mc(p, spec.truth_sims, rng);
    for (int j = 0; j <= spec.J; ++j) {
      const auto k = static_cast<std::size_t>(j);
      t.mu_u[a].push_back(spec.u_min + span * mm.mean_u[k]);
      t.se_u[a].push_back(span * mm.se_u[k]);
      t.mu_c[a].push_back(mm.mean_c[k]);
      t.se_c[a].push_back(mm.se_c[k]);
    }
    // c_0 has a closed form.
    const double nu = p[ParamLayout::nu_c0()], tau = p[ParamLayout::tau_c0()], pi = p[ParamLayout::pi_c0()];
    t.mu_c[a][0] = (1.0 - pi) * (p.family == CostFamily::LogNormal ? std::exp(nu + 0.5 * tau * tau) : std::exp(nu));
    t.se_c[a][0] = 0.0;
    t.mu_e[a] = qaly(t.mu_u[a], spec.time_unit_fractions);
    t.mu_c_total[a] = total_cost(t.mu_c[a], include_baseline_cost);
  }
  return t;
}

SyntheticTrial generate_trial(const TruthSpec& spec) {
  spec.validate();
  SyntheticTrial out;
  for (TrialDataset* d : {&out.observed, &out.full}) {
    d->J = spec.J;
    d->time_unit_fractions = spec.time_unit_fractions;
    d->u_min_theory = spec.u_min;
    d->u_max_theory = spec.u_max;
  }
  const double span = spec.u_max - spec.u_min;
  const auto& m = spec.missingness;
  for (int a = 1; a <= 2; ++a) {
    const HurdleParams& p = spec.arms[a - 1];
    Rng rng = make_rng(spec.seed, Stream::Synthetic, {static_cast<std::uint64_t>(a)});
    for (std::size_t i = 0; i < spec.n_per_arm; ++i) {
      const Trajectory t = simulate_trajectory(p, rng);
      SubjectRecord full;
      full.id = (a == 1 ? "C" : "I") + std::to_string(i + 1);
      full.arm = a;
      for (int j = 0; j <= spec.J; ++j) {
        const auto k = static_cast<std::size_t>(j);
        // u* == 1 maps to the exact ceiling so the structural one survives rescaling.
        full.utilities.push_back(t.u[k] >= 1.0 ? spec.u_max : spec.u_min + span * t.u[k]);
        full.costs.push_back(t.c[k]);
      }
      SubjectRecord obs = full;
      const double lc0 = p.log_cost_covariate(t.c[0]);
      for (int j = 0; j <= spec.J; ++j) {
        const auto k = static_cast<std::size_t>(j);
        double prob = 0.0;
        switch (m.type) {
          case Missingness::Type::MCAR: prob = m.rate; break;
          case Missingness::Type::MAR: prob = logistic(m.intercept + m.log_c0_coef * lc0); break;
          case Missingness::Type::MNAR:
            prob = logistic(m.intercept + m.u_coef * t.u[k] + m.log_c_coef * p.log_cost_covariate(t.c[k]));
            break;
        }
        const bool miss_u = bernoulli(rng, prob);
        const bool miss_c = j > 0 && (m.joint ? miss_u : bernoulli(rng, prob));
        if (miss_u) obs.utilities[k].reset();
        if (miss_c) obs.costs[k].reset();
      }
      out.full.subjects.push_back(std::move(full));
      out.observed.subjects.push_back(std::move(obs));
    }
  }
  return out;
}

RecoveryRow recover_target(const std::string& name, double truth, const std::vector<double>& draws) {
  if (draws.empty()) fail(ErrorCode::InvalidArgument, "recovery needs draws for " + name);
  RecoveryRow r;
  r.target = name;
  r.truth = truth;
  double s = 0.0;
  for (double x : draws) s += x;
  r.mean = s / static_cast<double>(draws.size());
  r.bias = r.mean - truth;
  const Interval ci = central_interval(draws, 0.95);
  r.lo = ci.lo;
  r.hi = ci.hi;
  r.covered = truth >= ci.lo && truth <= ci.hi;
  return r;
}

std::vector<RecoveryRow> recovery_report(const HurdleParams& truth, const PosteriorDraws& draws) {
  const auto truth_names = ParamLayout(truth.J).names();
  std::vector<std::string> unmatched;
  for (const auto& n : truth_names)
    if (std::find(draws.names.begin(), draws.names.end(), n) == draws.names.end()) unmatched.push_back(n);
  for (const auto& n : draws.names)
    if (std::find(truth_names.begin(), truth_names.end(), n) == truth_names.end()) unmatched.push_back(n);
  if (!unmatched.empty()) {
    std::string list;
    for (const auto& n : unmatched) list += (list.empty() ? "" : ", ") + n;
    fail(ErrorCode::InvalidArgument, "truth and draws disagree on parameter names: " + list);
  }
  std::vector<RecoveryRow> out;
  for (std::size_t k = 0; k < draws.names.size(); ++k) {
    std::vector<double> pooled;
    for (const auto& m : draws.chains) {
      const auto col = m.column(k);
      pooled.insert(pooled.end(), col.begin(), col.end());
    }
    out.push_back(recover_target(draws.names[k], truth.get(draws.names[k]), pooled));
  }
  return out;
}

}  // namespace hecon
