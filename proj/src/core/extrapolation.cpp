#include "extrapolation.hpp"

#include <cmath>

#include "error.hpp"
#include "parallel.hpp"

namespace hecon {

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::CompleteCase: return "cc";
    case ScenarioKind::Mar: return "mar";
    case ScenarioKind::BenchmarkZero: return "delta0";
    case ScenarioKind::Flat: return "flat";
    case ScenarioKind::Skew0: return "skew0";
    case ScenarioKind::Skew1: return "skew1";
    case ScenarioKind::Degenerate: return "degenerate";
    case ScenarioKind::CrossSectional: return "cs";
  }
  return "mar";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  for (auto k : {ScenarioKind::CompleteCase, ScenarioKind::Mar, ScenarioKind::BenchmarkZero, ScenarioKind::Flat,
                 ScenarioKind::Skew0, ScenarioKind::Skew1, ScenarioKind::Degenerate, ScenarioKind::CrossSectional})
    if (to_string(k) == s) return k;
  if (s == "benchmark_zero") return ScenarioKind::BenchmarkZero;
  fail(ErrorCode::Config, "unknown scenario '" + s + "' (expected cc, mar, delta0, flat, skew0, skew1, degenerate or cs)");
}

bool needs_noncompleters(ScenarioKind k) { return k != ScenarioKind::CompleteCase && k != ScenarioKind::CrossSectional; }

bool uses_restriction(ScenarioKind k) { return needs_noncompleters(k) && k != ScenarioKind::Mar; }

void SensitivityScenario::validate(int J) const {
  if (kind != ScenarioKind::Degenerate) return;
  const auto T = static_cast<std::size_t>(J + 1);
  if (delta_u.size() != T || delta_c.size() != T)
    fail(ErrorCode::Config, "degenerate scenario needs " + std::to_string(T) + " shifts for u and for c");
  for (std::size_t j = 0; j < T; ++j) {
    if (!std::isfinite(delta_u[j]) || !std::isfinite(delta_c[j])) fail(ErrorCode::Config, "degenerate shifts must be finite");
    if (delta_u[j] > 0.0 || delta_c[j] < 0.0)
      fail(ErrorCode::Config, "degenerate shifts must satisfy delta_u <= 0 and delta_c >= 0 (time " + std::to_string(j) + ")");
  }
}

DeltaDraw sample_delta(ScenarioKind kind, double sd_u, double sd_c, Rng& rng) {
  if (!(sd_u >= 0.0) || !(sd_c >= 0.0)) fail(ErrorCode::InvalidArgument, "calibration sds must be non-negative");
  auto shape = [kind](double U) {
    switch (kind) {
      case ScenarioKind::Flat: return U;
      case ScenarioKind::Skew0: return 1.0 - std::sqrt(U);
      case ScenarioKind::Skew1: return std::sqrt(U);
      default: return 0.0;
    }
  };
  if (kind != ScenarioKind::Flat && kind != ScenarioKind::Skew0 && kind != ScenarioKind::Skew1) return {};
  const double Uc = uniform01(rng);
  const double Uu = uniform01(rng);
  return {-2.0 * sd_u * shape(Uu), 2.0 * sd_c * shape(Uc)};
}

std::vector<DeltaDraw> sample_delta_path(const SensitivityScenario& scn, const Calibration& cal, Rng& rng) {
  const std::size_t T = cal.sd_u.size();
  std::vector<DeltaDraw> out(T);
  if (scn.kind == ScenarioKind::Degenerate) {
    for (std::size_t j = 0; j < T; ++j) out[j] = {scn.delta_u.at(j), scn.delta_c.at(j)};
    return out;
  }
  for (std::size_t j = 0; j < T; ++j) out[j] = sample_delta(scn.kind, cal.sd_u[j], cal.sd_c[j], rng);
  return out;
}

namespace {

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

Calibration calibration_sds(const RescaledDataset& data, int arm) {
  Calibration cal;
  const int J = data.base.J;
  for (int j = 0; j <= J; ++j) {
    std::vector<double> u, c;
    for (const auto& s : data.base.subjects) {
      if (s.arm != arm || s.completer()) continue;
      if (s.utility_observed(j)) u.push_back(*s.utilities[static_cast<std::size_t>(j)]);
      if (s.cost_observed(j)) c.push_back(*s.costs[static_cast<std::size_t>(j)]);
    }
    if (u.size() < 2 || c.size() < 2)
      cal.warnings.push_back("arm " + std::to_string(arm) + " time " + std::to_string(j) +
                             ": fewer than 2 observed non-completer values; calibration sd set to 0");
    cal.sd_u.push_back(sample_sd(u));
    cal.sd_c.push_back(sample_sd(c));
  }
  return cal;
}

ObservedShare observed_shares(const RescaledDataset& data, int arm) {
  ObservedShare w;
  const int J = data.base.J;
  std::size_t n = 0;
  std::vector<std::size_t> ou(static_cast<std::size_t>(J + 1), 0), oc(static_cast<std::size_t>(J + 1), 0);
  for (const auto& s : data.base.subjects) {
    if (s.arm != arm || s.completer()) continue;
    ++n;
    for (int j = 0; j <= J; ++j) {
      ou[static_cast<std::size_t>(j)] += s.utility_observed(j);
      oc[static_cast<std::size_t>(j)] += s.cost_observed(j);
    }
  }
  for (int j = 0; j <= J; ++j) {
    const auto t = static_cast<std::size_t>(j);
    w.w_u.push_back(n ? static_cast<double>(ou[t]) / static_cast<double>(n) : 0.0);
    w.w_c.push_back(n ? static_cast<double>(oc[t]) / static_cast<double>(n) : 0.0);
    for (const char* what : {"utility", "cost"}) {
      const bool none = what[0] == 'u' ? ou[t] == 0 : oc[t] == 0;
      if (none)
        w.warnings.push_back("arm " + std::to_string(arm) + " time " + std::to_string(j) + ": no observed non-completer " +
                             what + "; its mean is pure model extrapolation");
    }
  }
  return w;
}

TimeMeans group_time_means(const PosteriorDraws& draws, const std::vector<std::size_t>& draw_index, int n_sims,
                           std::uint64_t seed, std::uint64_t stream_id) {
  TimeMeans out;
  out.scale = UtilityScale::Model;
  out.u.resize(draw_index.size());
  out.c.resize(draw_index.size());
  parallel_for(draw_index.size(), [&](std::size_t i) {
    const std::size_t d = draw_index[i];
    Rng rng = make_rng(seed, Stream::MarginalMeans, {stream_id, static_cast<std::uint64_t>(d)});
    const MarginalMoments mm = marginal_mean_by_mc(draws.params_at(d), n_sims, rng);
    out.u[i] = mm.mean_u;
    out.c[i] = mm.mean_c;
  });
  return out;
}

TimeMeans restricted_group_means(const TimeMeans& m, const ObservedShare& w, const SensitivityScenario& scn,
                                 const Calibration& cal, std::uint64_t seed, int arm) {
  if (m.scale != UtilityScale::Model) fail(ErrorCode::Unit, "restriction needs model-scale utility means");
  TimeMeans out = m;
  for (std::size_t d = 0; d < m.n_draws(); ++d) {
    Rng rng = make_rng(seed, Stream::Delta, {static_cast<std::uint64_t>(arm), static_cast<std::uint64_t>(d)});
    const auto delta = sample_delta_path(scn, cal, rng);
    for (std::size_t j = 0; j < m.u[d].size(); ++j) {
      out.u[d][j] = apply_restriction(m.u[d][j], w.w_u[j], delta[j].u);
      out.c[d][j] = apply_restriction(m.c[d][j], w.w_c[j], delta[j].c);
    }
  }
  return out;
}

TimeMeans mix_means(const std::vector<double>& psi_completer, const TimeMeans& completers, const TimeMeans& group) {
  if (completers.scale != UtilityScale::Model || group.scale != UtilityScale::Model)
    fail(ErrorCode::Unit, "pattern mixing needs model-scale utility means");
  if (completers.n_draws() != group.n_draws() || psi_completer.size() != group.n_draws())
    fail(ErrorCode::Shape, "completer, non-completer and pattern draws must be aligned");
  TimeMeans out = completers;
  for (std::size_t d = 0; d < out.n_draws(); ++d) {
    const double p = psi_completer[d];
    for (std::size_t j = 0; j < out.u[d].size(); ++j) {
      out.u[d][j] = p * completers.u[d][j] + (1.0 - p) * group.u[d][j];
      out.c[d][j] = p * completers.c[d][j] + (1.0 - p) * group.c[d][j];
    }
  }
  return out;
}

TimeMeans to_original_scale(const TimeMeans& m, const RescaledDataset& data) {
  if (m.scale != UtilityScale::Model) fail(ErrorCode::Unit, "utility means are already on the original scale");
  TimeMeans out = m;
  out.scale = UtilityScale::Original;
  for (auto& row : out.u)
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = data.to_original(static_cast<int>(j), row[j]);
  return out;
}

void flag_violations(MarginalMeans& m, double u_min, double u_max) {
  for (int arm = 1; arm <= 2; ++arm) {
    const TimeMeans& t = m.arms[arm - 1];
    std::size_t bad_u = 0, bad_c = 0;
    for (std::size_t d = 0; d < t.n_draws(); ++d)
      for (std::size_t j = 0; j < t.u[d].size(); ++j) {
        const double lo = t.scale == UtilityScale::Model ? 0.0 : u_min;
        const double hi = t.scale == UtilityScale::Model ? 1.0 : u_max;
        bad_u += t.u[d][j] < lo || t.u[d][j] > hi;
        bad_c += t.c[d][j] < 0.0;
      }
    if (bad_u)
      m.flags.push_back("arm " + std::to_string(arm) + ": " + std::to_string(bad_u) +
                        " draw/time utility means outside the instrument bounds");
    if (bad_c) m.flags.push_back("arm " + std::to_string(arm) + ": " + std::to_string(bad_c) + " draw/time cost means below 0");
  }
}

}  // namespace hecon
