#include "hurdle_model.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

#include "error.hpp"

namespace hecon {

using nlohmann::json;

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;
}

std::string to_string(CostFamily f) { return f == CostFamily::LogNormal ? "lognormal" : "gamma"; }

CostFamily cost_family_from_string(const std::string& s) {
  if (s == "lognormal" || s == "LogNormal") return CostFamily::LogNormal;
  if (s == "gamma" || s == "Gamma") return CostFamily::Gamma;
  fail(ErrorCode::Config, "unknown cost family '" + s + "' (expected lognormal or gamma)");
}

ParamLayout::ParamLayout(int J) : J_(J) {
  if (J < 1) fail(ErrorCode::InvalidArgument, "model needs J >= 1");
  auto add = [&](std::string name, ParamKind kind, int t, Factor f, int slot) {
    info_.push_back({std::move(name), kind, t, f, slot});
  };
  add("nu_c_0", ParamKind::Coefficient, 0, Factor::CostContinuous, 0);
  add("tau_c_0", ParamKind::Scale, 0, Factor::CostContinuous, -1);
  add("pi_c_0", ParamKind::Probability, 0, Factor::CostHurdle, -1);
  add("alpha_0_0", ParamKind::Coefficient, 0, Factor::UtilityContinuous, 0);
  add("alpha_1_0", ParamKind::Coefficient, 0, Factor::UtilityContinuous, 1);
  add("sigma_u_0", ParamKind::Scale, 0, Factor::UtilityContinuous, -1);
  add("gamma_0_0", ParamKind::Coefficient, 0, Factor::UtilityHurdle, 0);
  add("gamma_1_0", ParamKind::Coefficient, 0, Factor::UtilityHurdle, 1);
  for (int j = 1; j <= J; ++j) {
    const std::string t = "_" + std::to_string(j);
    for (int k = 0; k < 3; ++k) add("beta_" + std::to_string(k) + t, ParamKind::Coefficient, j, Factor::CostContinuous, k);
    add("tau_c" + t, ParamKind::Scale, j, Factor::CostContinuous, -1);
    for (int k = 0; k < 3; ++k) add("zeta_" + std::to_string(k) + t, ParamKind::Coefficient, j, Factor::CostHurdle, k);
    for (int k = 0; k < 3; ++k)
      add("alpha_" + std::to_string(k) + t, ParamKind::Coefficient, j, Factor::UtilityContinuous, k);
    add("sigma_u" + t, ParamKind::Scale, j, Factor::UtilityContinuous, -1);
    for (int k = 0; k < 3; ++k) add("gamma_" + std::to_string(k) + t, ParamKind::Coefficient, j, Factor::UtilityHurdle, k);
  }
}

std::optional<std::size_t> ParamLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < info_.size(); ++i)
    if (info_[i].name == name) return i;
  return std::nullopt;
}

std::size_t ParamLayout::index(const std::string& name) const {
  if (auto i = find(name)) return *i;
  fail(ErrorCode::InvalidArgument, "unknown parameter name '" + name + "'");
}

std::vector<std::string> ParamLayout::names() const {
  std::vector<std::string> out;
  for (const auto& p : info_) out.push_back(p.name);
  return out;
}

HurdleParams HurdleParams::zeros(int J, CostFamily family, double cost_floor) {
  HurdleParams p;
  p.J = J;
  p.family = family;
  p.cost_floor = cost_floor;
  ParamLayout layout(J);
  p.values.assign(layout.size(), 0.0);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (layout[i].kind == ParamKind::Scale) p.values[i] = layout[i].factor == Factor::UtilityContinuous ? 0.1 : 1.0;
    if (layout[i].kind == ParamKind::Probability) p.values[i] = 0.5;
  }
  return p;
}

double HurdleParams::get(const std::string& name) const { return values.at(ParamLayout(J).index(name)); }

void HurdleParams::set(const std::string& name, double v) { values.at(ParamLayout(J).index(name)) = v; }

void HurdleParams::apply_mask() {
  ParamLayout layout(J);
  for (const auto& name : zero_mask) {
    const auto i = layout.index(name);
    if (layout[i].kind != ParamKind::Coefficient)
      fail(ErrorCode::InvalidArgument, "only regression coefficients can be zero-masked: " + name);
    values[i] = 0.0;
  }
}

void HurdleParams::validate() const {
  ParamLayout layout(J);
  if (values.size() != layout.size()) fail(ErrorCode::InvalidArgument, "parameter vector has wrong length");
  if (!(cost_floor > 0.0)) fail(ErrorCode::InvalidArgument, "cost floor must be positive");
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) fail(ErrorCode::Numeric, "parameter " + layout[i].name + " is not finite");
    if (layout[i].kind == ParamKind::Scale && !(v > 0.0))
      fail(ErrorCode::InvalidArgument, "scale parameter " + layout[i].name + " must be positive");
    if (layout[i].kind == ParamKind::Probability && !(v >= 0.0 && v <= 1.0))
      fail(ErrorCode::InvalidArgument, "probability " + layout[i].name + " must lie in [0,1]");
  }
  for (const auto& name : zero_mask)
    if (values[layout.index(name)] != 0.0) fail(ErrorCode::InvalidArgument, "zero-masked " + name + " is nonzero");
}

std::string params_to_json(const HurdleParams& p) {
  ParamLayout layout(p.J);
  json j;
  j["J"] = p.J;
  j["cost_family"] = to_string(p.family);
  j["cost_floor"] = p.cost_floor;
  json coef = json::object();
  for (std::size_t i = 0; i < layout.size(); ++i) coef[layout[i].name] = p.values[i];
  j["coefficients"] = coef;
  j["zero_mask"] = std::vector<std::string>(p.zero_mask.begin(), p.zero_mask.end());
  j["metadata"] = {
      {"beta_parameterization", "convention: a = nu*phi, b = (1-nu)*phi, phi = nu(1-nu)/sigma^2 - 1"},
      {"gamma_link", "convention: mean = exp(nu), shape = 1/tau^2"},
      {"log_cost_at_zero", "convention: log(cost_floor)"},
  };
  return j.dump();
}

HurdleParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("parameter JSON: ") + e.what());
  }
  try {
    HurdleParams p = HurdleParams::zeros(j.value("J", 2), cost_family_from_string(j.value("cost_family", "lognormal")),
                                         j.value("cost_floor", 1.0));
    ParamLayout layout(p.J);
    const json& coef = j.contains("coefficients") ? j.at("coefficients") : j;
    for (auto it = coef.begin(); it != coef.end(); ++it) {
      if (!it.value().is_number()) continue;
      auto idx = layout.find(it.key());
      if (!idx) {
        if (&coef == &j) continue;
        fail(ErrorCode::Schema, "unknown parameter name '" + it.key() + "'");
      }
      p.values[*idx] = it.value().get<double>();
    }
    if (j.contains("zero_mask"))
      for (const auto& n : j.at("zero_mask")) {
        layout.index(n.get<std::string>());
        p.zero_mask.insert(n.get<std::string>());
      }
    p.apply_mask();
    p.validate();
    return p;
  } catch (const json::exception& e) {
    fail(ErrorCode::Schema, std::string("parameter JSON: ") + e.what());
  }
}

void Trajectory::set_cost(int j, double v) {
  c[static_cast<std::size_t>(j)] = v;
  dc[static_cast<std::size_t>(j)] = v == 0.0 ? 1 : 0;
}

void Trajectory::set_utility(int j, double v) {
  u[static_cast<std::size_t>(j)] = v;
  du[static_cast<std::size_t>(j)] = v == 1.0 ? 1 : 0;
}

bool Trajectory::consistent() const {
  for (std::size_t j = 0; j < c.size(); ++j) {
    if ((dc[j] == 1) != (c[j] == 0.0) || c[j] < 0.0) return false;
    if ((du[j] == 1) != (u[j] == 1.0) || u[j] < 0.0 || u[j] > 1.0) return false;
  }
  return true;
}

bool beta_moments_feasible(double mean, double sd) {
  return mean > 0.0 && mean < 1.0 && sd > 0.0 && sd * sd < mean * (1.0 - mean);
}

BetaShapes beta_moments_to_shapes(double mean, double sd) {
  if (!beta_moments_feasible(mean, sd))
    fail(ErrorCode::Numeric, "infeasible Beta moments: mean " + std::to_string(mean) + ", sd " + std::to_string(sd));
  const double phi = mean * (1.0 - mean) / (sd * sd) - 1.0;
  return {mean * phi, (1.0 - mean) * phi};
}

namespace {

inline double checked(double eta) {
  if (!std::isfinite(eta)) fail(ErrorCode::Numeric, "non-finite linear predictor");
  return eta;
}

}  // namespace

double zero_cost_logit(const HurdleParams& p, int j, const StepInputs& x) {
  using L = ParamLayout;
  return checked(p[L::zeta(0, j)] + p[L::zeta(1, j)] * x.lc_prev + p[L::zeta(2, j)] * x.u_prev);
}

double zero_cost_prob(const HurdleParams& p, int j, const StepInputs& x) {
  return j == 0 ? p[ParamLayout::pi_c0()] : logistic(zero_cost_logit(p, j, x));
}

double cost_location(const HurdleParams& p, int j, const StepInputs& x) {
  using L = ParamLayout;
  if (j == 0) return checked(p[L::nu_c0()]);
  return checked(p[L::beta(0, j)] + p[L::beta(1, j)] * x.lc_prev + p[L::beta(2, j)] * x.u_prev);
}

double one_utility_logit(const HurdleParams& p, int j, const StepInputs& x) {
  using L = ParamLayout;
  double eta = p[L::gamma(0, j)] + p[L::gamma(1, j)] * x.lc_cur;
  if (j > 0) eta += p[L::gamma(2, j)] * x.u_prev;
  return checked(eta);
}

double utility_mean_logit(const HurdleParams& p, int j, const StepInputs& x) {
  using L = ParamLayout;
  double eta = p[L::alpha(0, j)] + p[L::alpha(1, j)] * x.lc_cur;
  if (j > 0) eta += p[L::alpha(2, j)] * x.u_prev;
  return checked(eta);
}

double log_cost_hurdle(const HurdleParams& p, int j, const StepInputs& x, int dc) {
  if (j == 0) {
    const double pi = p[ParamLayout::pi_c0()];
    return dc ? std::log(pi) : std::log1p(-pi);
  }
  return log_bernoulli_logit(dc, zero_cost_logit(p, j, x));
}

double log_cost_density(CostFamily family, double c, double log_c, double location, double scale) {
  if (family == CostFamily::LogNormal) {
    const double z = (log_c - location) / scale;
    return -log_c - std::log(scale) - kHalfLog2Pi - 0.5 * z * z;
  }
  const double shape = 1.0 / (scale * scale);
  const double rate = shape * std::exp(-location);
  return shape * (std::log(shape) - location) - std::lgamma(shape) + (shape - 1.0) * log_c - rate * c;
}

double log_utility_hurdle(const HurdleParams& p, int j, const StepInputs& x, int du) {
  return log_bernoulli_logit(du, one_utility_logit(p, j, x));
}

double log_beta_mean_sd(double u, double mean, double sd) {
  if (!beta_moments_feasible(mean, sd)) return -std::numeric_limits<double>::infinity();
  const double phi = mean * (1.0 - mean) / (sd * sd) - 1.0;
  const double a = mean * phi, b = (1.0 - mean) * phi;
  const double x = std::clamp(u, kUtilityClamp, 1.0 - kUtilityClamp);
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
}

double LogLikTerms::total() const {
  double s = 0.0;
  for (std::size_t j = 0; j < cost_hurdle.size(); ++j)
    s += cost_hurdle[j] + cost_continuous[j] + utility_hurdle[j] + utility_continuous[j];
  return s;
}

double LogLikTerms::block(int j, bool cost) const {
  const auto t = static_cast<std::size_t>(j);
  return cost ? cost_hurdle[t] + cost_continuous[t] : utility_hurdle[t] + utility_continuous[t];
}

ResponseMask ResponseMask::all(int J) {
  return {std::vector<bool>(static_cast<std::size_t>(J + 1), true), std::vector<bool>(static_cast<std::size_t>(J + 1), true)};
}

StepInputs step_inputs(const HurdleParams& p, const Trajectory& traj, int j) {
  StepInputs x;
  const auto t = static_cast<std::size_t>(j);
  x.lc_cur = p.log_cost_covariate(traj.c[t]);
  if (j > 0) {
    x.lc_prev = p.log_cost_covariate(traj.c[t - 1]);
    x.u_prev = traj.u[t - 1];
  }
  return x;
}

LogLikTerms loglik_terms(const HurdleParams& p, const Trajectory& traj, const ResponseMask* observed) {
  const auto n = static_cast<std::size_t>(p.J + 1);
  if (traj.c.size() != n) fail(ErrorCode::Shape, "trajectory length does not match model J");
  LogLikTerms t;
  t.cost_hurdle.assign(n, 0.0);
  t.cost_continuous.assign(n, 0.0);
  t.utility_hurdle.assign(n, 0.0);
  t.utility_continuous.assign(n, 0.0);
  for (int j = 0; j <= p.J; ++j) {
    const auto s = static_cast<std::size_t>(j);
    const StepInputs x = step_inputs(p, traj, j);
    if (!observed || observed->cost[s]) {
      t.cost_hurdle[s] = log_cost_hurdle(p, j, x, traj.dc[s]);
      if (!traj.dc[s]) {
        const double c = traj.c[s];
        t.cost_continuous[s] = log_cost_density(p.family, c, std::log(c), cost_location(p, j, x), p[ParamLayout::tau_c(j)]);
      }
    }
    if (!observed || observed->utility[s]) {
      t.utility_hurdle[s] = log_utility_hurdle(p, j, x, traj.du[s]);
      if (!traj.du[s])
        t.utility_continuous[s] =
            log_beta_mean_sd(traj.u[s], logistic(utility_mean_logit(p, j, x)), p[ParamLayout::sigma_u(j)]);
    }
  }
  return t;
}

double loglik_subject(const HurdleParams& p, const Trajectory& traj, const ResponseMask* observed) {
  return loglik_terms(p, traj, observed).total();
}

double draw_positive_cost(const HurdleParams& p, int j, const StepInputs& x, Rng& rng) {
  const double loc = cost_location(p, j, x);
  const double scale = p[ParamLayout::tau_c(j)];
  if (p.family == CostFamily::LogNormal) return std::exp(loc + scale * std_normal(rng));
  const double shape = 1.0 / (scale * scale);
  double c = 0.0;
  // A Gamma draw can underflow to exactly 0 for tiny shapes; 0 is reserved for the hurdle.
  for (int k = 0; k < kSimulationRetryCap && c <= 0.0; ++k) c = gamma_draw(rng, shape, std::exp(loc) / shape);
  if (!(c > 0.0)) fail(ErrorCode::Numeric, "Gamma cost draw underflowed");
  return c;
}

std::optional<double> draw_interior_utility(const HurdleParams& p, int j, const StepInputs& x, Rng& rng) {
  const double mean = logistic(utility_mean_logit(p, j, x));
  const double sd = p[ParamLayout::sigma_u(j)];
  if (!beta_moments_feasible(mean, sd)) return std::nullopt;
  const auto sh = beta_moments_to_shapes(mean, sd);
  return std::clamp(beta_draw(rng, sh.a, sh.b), kUtilityClamp, 1.0 - kUtilityClamp);
}

void simulate_cost(const HurdleParams& p, Trajectory& traj, int j, Rng& rng) {
  const StepInputs x = step_inputs(p, traj, j);
  const bool zero = bernoulli(rng, zero_cost_prob(p, j, x));
  traj.set_cost(j, zero ? 0.0 : draw_positive_cost(p, j, x, rng));
}

bool simulate_utility(const HurdleParams& p, Trajectory& traj, int j, Rng& rng) {
  const StepInputs x = step_inputs(p, traj, j);
  if (bernoulli(rng, logistic(one_utility_logit(p, j, x)))) {
    traj.set_utility(j, 1.0);
    return true;
  }
  auto u = draw_interior_utility(p, j, x, rng);
  if (!u) return false;
  traj.set_utility(j, *u);
  return true;
}

Trajectory simulate_trajectory(const HurdleParams& p, Rng& rng) {
  Trajectory traj(p.J);
  for (int attempt = 0; attempt < kSimulationRetryCap; ++attempt) {
    bool ok = true;
    for (int j = 0; j <= p.J && ok; ++j) {
      simulate_cost(p, traj, j, rng);
      ok = simulate_utility(p, traj, j, rng);
    }
    if (ok) return traj;
  }
  fail(ErrorCode::Numeric, "simulation hit infeasible Beta moments " + std::to_string(kSimulationRetryCap) + " times");
}

double log_prior(const HurdleParams& p, const PriorWidths& hyper) {
  ParamLayout layout(p.J);
  const double sd = hyper.coefficient_sd;
  const double log_norm = -std::log(sd) - kHalfLog2Pi;
  double lp = 0.0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& info = layout[i];
    const double v = p.values[i];
    switch (info.kind) {
      case ParamKind::Coefficient:
        if (p.zero_mask.count(info.name)) break;
        lp += log_norm - 0.5 * (v / sd) * (v / sd);
        break;
      case ParamKind::Scale:
        if (!(v > 0.0 && v < hyper.scale_max)) return -std::numeric_limits<double>::infinity();
        lp -= std::log(hyper.scale_max);
        break;
      case ParamKind::Probability:
        if (!(v > 0.0 && v < 1.0)) return -std::numeric_limits<double>::infinity();
        break;
    }
  }
  return lp;
}

MarginalMoments marginal_mean_by_mc(const HurdleParams& p, int n_sims, Rng& rng) {
  if (n_sims < 1) fail(ErrorCode::InvalidArgument, "n_sims must be at least 1");
  const auto n = static_cast<std::size_t>(p.J + 1);
  std::vector<double> su(n, 0.0), su2(n, 0.0), sc(n, 0.0), sc2(n, 0.0);
  for (int s = 0; s < n_sims; ++s) {
    const Trajectory t = simulate_trajectory(p, rng);
    for (std::size_t j = 0; j < n; ++j) {
      su[j] += t.u[j];
      su2[j] += t.u[j] * t.u[j];
      sc[j] += t.c[j];
      sc2[j] += t.c[j] * t.c[j];
    }
  }
  MarginalMoments m;
  const double N = n_sims;
  for (std::size_t j = 0; j < n; ++j) {
    const double mu = su[j] / N, mc = sc[j] / N;
    const double vu = n_sims > 1 ? std::max(0.0, (su2[j] - N * mu * mu) / (N - 1.0)) : 0.0;
    const double vc = n_sims > 1 ? std::max(0.0, (sc2[j] - N * mc * mc) / (N - 1.0)) : 0.0;
    m.mean_u.push_back(mu);
    m.mean_c.push_back(mc);
    m.se_u.push_back(std::sqrt(vu / N));
    m.se_c.push_back(std::sqrt(vc / N));
  }
  return m;
}

}  // namespace hecon
