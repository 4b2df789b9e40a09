#include "assessment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "diagnostics.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace hecon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.69314718055994530942;

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Density of an observed block given its predecessors already in the trajectory.
double observed_block(const HurdleParams& p, const Trajectory& t, int j, bool cost) {
  const StepInputs x = step_inputs(p, t, j);
  const auto s = static_cast<std::size_t>(j);
  if (cost) {
    double l = log_cost_hurdle(p, j, x, t.dc[s]);
    if (!t.dc[s]) l += log_cost_density(p.family, t.c[s], std::log(t.c[s]), cost_location(p, j, x), p[ParamLayout::tau_c(j)]);
    return l;
  }
  double l = log_utility_hurdle(p, j, x, t.du[s]);
  if (!t.du[s]) l += log_beta_mean_sd(t.u[s], logistic(utility_mean_logit(p, j, x)), p[ParamLayout::sigma_u(j)]);
  return l;
}

}  // namespace

std::vector<std::string> block_names(int J) {
  std::vector<std::string> out;
  for (int j = 0; j <= J; ++j) {
    const std::string t = std::to_string(j), prev = std::to_string(j - 1);
    out.push_back(j == 0 ? "c_0" : "c_" + t + "|c_" + prev + ",u_" + prev);
    out.push_back(j == 0 ? "u_0|c_0" : "u_" + t + "|u_" + prev + ",c_" + t);
  }
  return out;
}

ObservedLoglik observed_data_loglik(const HurdleParams& p, const GroupSubject& subject, int M, Rng& rng) {
  if (M < 1) fail(ErrorCode::InvalidArgument, "observed-data likelihood needs M >= 1");
  const int J = p.J;
  const int nb = 2 * (J + 1);
  if (static_cast<int>(subject.u.size()) != J + 1 || static_cast<int>(subject.c.size()) != J + 1)
    fail(ErrorCode::Shape, "subject " + subject.id + " does not match model J");
  std::vector<char> obs(static_cast<std::size_t>(nb));
  std::vector<int> missing_rank(static_cast<std::size_t>(nb), -1);
  int k = 0;
  for (int b = 0; b < nb; ++b) {
    const auto j = static_cast<std::size_t>(b / 2);
    obs[static_cast<std::size_t>(b)] = b % 2 == 0 ? subject.c[j].has_value() : subject.u[j].has_value();
    if (!obs[static_cast<std::size_t>(b)]) missing_rank[static_cast<std::size_t>(b)] = k++;
  }
  if (k > 20) fail(ErrorCode::InvalidArgument, "too many missing blocks to enumerate");

  ObservedLoglik out;
  out.block.assign(static_cast<std::size_t>(nb), 0.0);
  Trajectory t(J);
  if (k == 0) {
    for (int b = 0; b < nb; ++b) {
      const int j = b / 2;
      const bool cost = b % 2 == 0;
      cost ? t.set_cost(j, *subject.c[static_cast<std::size_t>(j)]) : t.set_utility(j, *subject.u[static_cast<std::size_t>(j)]);
      out.block[static_cast<std::size_t>(b)] = observed_block(p, t, j, cost);
    }
    out.total = std::accumulate(out.block.begin(), out.block.end(), 0.0);
    if (!std::isfinite(out.total)) fail(ErrorCode::Numeric, "observed-data log-likelihood is not finite for subject " + subject.id);
    return out;
  }

  const std::size_t combos = std::size_t{1} << k;
  const std::size_t m = std::max<std::size_t>(1, (static_cast<std::size_t>(M) + combos - 1) / combos);
  std::vector<std::vector<double>> lw(static_cast<std::size_t>(nb), std::vector<double>(combos * m, kNegInf));
  for (std::size_t combo = 0; combo < combos; ++combo) {
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t slot = combo * m + r;
      double w = 0.0;
      for (int b = 0; b < nb && w > kNegInf; ++b) {
        const int j = b / 2;
        const auto s = static_cast<std::size_t>(j);
        const bool cost = b % 2 == 0;
        if (obs[static_cast<std::size_t>(b)]) {
          cost ? t.set_cost(j, *subject.c[s]) : t.set_utility(j, *subject.u[s]);
          w += observed_block(p, t, j, cost);
        } else {
          const bool d = (combo >> missing_rank[static_cast<std::size_t>(b)]) & 1u;
          const StepInputs x = step_inputs(p, t, j);
          if (cost) {
            const double pz = zero_cost_prob(p, j, x);
            w += d ? std::log(pz) : std::log1p(-pz);
            t.set_cost(j, d ? 0.0 : draw_positive_cost(p, j, x, rng));
          } else {
            const double p1 = logistic(one_utility_logit(p, j, x));
            w += d ? std::log(p1) : std::log1p(-p1);
            if (d) {
              t.set_utility(j, 1.0);
            } else if (auto u = draw_interior_utility(p, j, x, rng)) {
              t.set_utility(j, *u);
            } else {
              w = kNegInf;
            }
          }
        }
        if (std::isnan(w)) w = kNegInf;
        lw[static_cast<std::size_t>(b)][slot] = w;
      }
    }
  }
  // P_b = 2^{-(k - k_b)} / m * sum W_{<=b}, with k_b missing blocks up to b; the
  // contributions log P_b - log P_{b-1} telescope to log P_last.
  double prev = 0.0;
  int k_b = 0;
  const double log_m = std::log(static_cast<double>(m));
  for (int b = 0; b < nb; ++b) {
    if (!obs[static_cast<std::size_t>(b)]) ++k_b;
    const double logP = log_sum_exp(lw[static_cast<std::size_t>(b)]) - log_m - static_cast<double>(k - k_b) * kLn2;
    out.block[static_cast<std::size_t>(b)] = logP - prev;
    prev = logP;
  }
  out.total = prev;
  if (!std::isfinite(out.total)) fail(ErrorCode::Numeric, "observed-data log-likelihood is not finite for subject " + subject.id);
  return out;
}

void DicReport::accumulate(const DicReport& other) {
  if (blocks.empty()) {
    *this = other;
    return;
  }
  if (other.blocks.size() != blocks.size()) fail(ErrorCode::Shape, "DIC reports have different block layouts");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b].d_bar += other.blocks[b].d_bar;
    blocks[b].d_hat += other.blocks[b].d_hat;
    blocks[b].p_d += other.blocks[b].p_d;
    blocks[b].dic += other.blocks[b].dic;
  }
  total.d_bar += other.total.d_bar;
  total.d_hat += other.total.d_hat;
  total.p_d += other.total.p_d;
  total.dic += other.total.dic;
  warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

std::vector<std::size_t> thin_indices(std::size_t total, std::size_t max_draws) {
  std::vector<std::size_t> out;
  if (max_draws == 0 || max_draws >= total) {
    out.resize(total);
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  for (std::size_t i = 0; i < max_draws; ++i) out.push_back(i * total / max_draws);
  return out;
}

HurdleParams posterior_mean_params(const PosteriorDraws& draws) {
  const ParamLayout layout(draws.J);
  HurdleParams p = draws.params_at(0);
  const std::size_t N = draws.total_draws();
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto kind = layout[k].kind;
    double s = 0.0;
    for (const auto& m : draws.chains)
      for (std::size_t r = 0; r < m.rows; ++r) {
        const double v = m.at(r, k);
        if (kind == ParamKind::Scale) s += std::log(v);
        else if (kind == ParamKind::Probability) s += std::log(v) - std::log1p(-v);
        else s += v;
      }
    const double mean = s / static_cast<double>(N);
    p.values[k] = kind == ParamKind::Scale ? std::exp(mean) : kind == ParamKind::Probability ? logistic(mean) : mean;
  }
  p.apply_mask();
  return p;
}

HurdleParams posterior_median_params(const PosteriorDraws& draws) {
  HurdleParams p = draws.params_at(0);
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    std::vector<double> pooled;
    for (const auto& m : draws.chains)
      for (std::size_t r = 0; r < m.rows; ++r) pooled.push_back(m.at(r, k));
    p.values[k] = quantile(pooled, 0.5);
  }
  p.apply_mask();
  return p;
}

namespace {

// -2 * block log-likelihood summed over subjects; nullopt when some subject is non-finite.
std::optional<std::vector<double>> group_deviance(const HurdleParams& p, const GroupData& g, int M, std::uint64_t seed,
                                                  std::uint64_t stream, std::uint64_t draw_tag) {
  const auto nb = static_cast<std::size_t>(2 * (g.J + 1));
  std::vector<double> dev(nb, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Rng rng = make_rng(seed, Stream::Dic, {stream, draw_tag, static_cast<std::uint64_t>(i)});
    try {
      const auto ll = observed_data_loglik(p, g.subjects[i], M, rng);
      for (std::size_t b = 0; b < nb; ++b) dev[b] += -2.0 * ll.block[b];
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Numeric) throw;
      return std::nullopt;
    }
  }
  return dev;
}

}  // namespace

DicReport dic(const PosteriorDraws& draws, const GroupData& group, const DicSettings& settings) {
  if (settings.M_bar < 1 || settings.M_hat < 1) fail(ErrorCode::Config, "DIC Monte Carlo sizes must be positive");
  if (draws.total_draws() == 0) fail(ErrorCode::InvalidArgument, "DIC needs posterior draws");
  const auto names = block_names(group.J);
  const std::size_t nb = names.size();
  const auto idx = thin_indices(draws.total_draws(), settings.max_draws);

  std::vector<std::vector<double>> per_draw(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    auto dev = group_deviance(draws.params_at(idx[i]), group, settings.M_bar, settings.seed, settings.stream_id, idx[i]);
    if (!dev) fail(ErrorCode::Numeric, "observed-data likelihood is not finite at posterior draw " + std::to_string(idx[i]));
    per_draw[i] = std::move(*dev);
  });

  DicReport rep;
  rep.family = draws.family;
  rep.M_bar = settings.M_bar;
  rep.M_hat = settings.M_hat;
  rep.n_draws = idx.size();
  const std::uint64_t plug_tag = std::numeric_limits<std::uint64_t>::max();
  auto d_hat = group_deviance(posterior_mean_params(draws), group, settings.M_hat, settings.seed, settings.stream_id, plug_tag);
  if (!d_hat) {
    rep.warnings.push_back("posterior-mean parameters infeasible for " + to_string(group.kind) + " arm " +
                           std::to_string(group.arm) + "; using the posterior median");
    d_hat = group_deviance(posterior_median_params(draws), group, settings.M_hat, settings.seed, settings.stream_id, plug_tag);
    if (!d_hat) fail(ErrorCode::Numeric, "plug-in deviance is not finite at the posterior mean or median");
  }
  for (std::size_t b = 0; b < nb; ++b) {
    DicBlock blk;
    blk.name = names[b];
    for (const auto& d : per_draw) blk.d_bar += d[b];
    blk.d_bar /= static_cast<double>(per_draw.size());
    blk.d_hat = (*d_hat)[b];
    blk.p_d = blk.d_bar - blk.d_hat;
    blk.dic = blk.d_bar + blk.p_d;
    rep.total.d_bar += blk.d_bar;
    rep.total.d_hat += blk.d_hat;
    rep.total.p_d += blk.p_d;
    rep.total.dic += blk.dic;
    rep.blocks.push_back(blk);
  }
  rep.total.name = "total";
  return rep;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t e = i;
    while (e + 1 < n && x[order[e + 1]] == x[order[i]]) ++e;
    const double avg = (static_cast<double>(i) + static_cast<double>(e)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= e; ++k) r[order[k]] = avg;
    i = e + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) fail(ErrorCode::Shape, "Spearman needs paired samples");
  const std::size_t n = x.size();
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

double ppc_p_value(const std::vector<double>& replicated, double observed) {
  std::size_t n = 0, le = 0, ge = 0;
  for (double r : replicated) {
    if (std::isnan(r)) continue;
    ++n;
    le += r <= observed;
    ge += r >= observed;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = 2.0 * std::min(static_cast<double>(le), static_cast<double>(ge)) / static_cast<double>(n);
  return std::min(1.0, p);
}

TrialDataset replicate_observed(const FittedArm arms[2], const PsiPosterior& psi, const TrialDataset& shape,
                                std::size_t draw, Rng& rng) {
  TrialDataset rep;
  rep.J = shape.J;
  rep.time_unit_fractions = shape.time_unit_fractions;
  rep.u_min_theory = 0.0;
  rep.u_max_theory = 1.0;
  for (int arm = 1; arm <= 2; ++arm) {
    const FittedArm& fa = arms[arm - 1];
    if (!fa.completers) fail(ErrorCode::Dependency, "replication needs the completer fit for arm " + std::to_string(arm));
    const ArmPsi& ap = psi.arm(arm);
    const auto w = dirichlet_draw(ap.posterior_concentration, rng);
    const HurdleParams pc = fa.completers->params_at(draw % fa.completers->total_draws());
    std::optional<HurdleParams> pn;
    if (fa.noncompleters) pn = fa.noncompleters->params_at(draw % fa.noncompleters->total_draws());
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    const std::size_t n = shape.arm_size(arm);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t cat = pick(rng);
      if (cat > 0 && !pn) fail(ErrorCode::Dependency, "replication needs the non-completer fit for arm " + std::to_string(arm));
      const Trajectory t = simulate_trajectory(cat == 0 ? pc : *pn, rng);
      const Signature& sig = ap.categories[cat];
      SubjectRecord s;
      s.id = "rep" + std::to_string(arm) + "_" + std::to_string(i);
      s.arm = arm;
      for (int j = 0; j <= shape.J; ++j) {
        const auto k = static_cast<std::size_t>(j);
        s.utilities.push_back(sig[2 * k] ? std::optional<double>(t.u[k]) : std::nullopt);
        s.costs.push_back(sig[2 * k + 1] ? std::optional<double>(t.c[k]) : std::nullopt);
      }
      rep.subjects.push_back(std::move(s));
    }
  }
  return rep;
}

namespace {

struct VarRef {
  std::string name;
  int time;
  bool cost;
};

std::vector<VarRef> ppc_variables(int J) {
  std::vector<VarRef> v;
  for (int j = 0; j <= J; ++j) {
    v.push_back({"u" + std::to_string(j), j, false});
    v.push_back({"c" + std::to_string(j), j, true});
  }
  return v;
}

double pair_correlation(const TrialDataset& d, int arm, const VarRef& a, const VarRef& b) {
  std::vector<double> x, y;
  auto get = [](const SubjectRecord& s, const VarRef& v) {
    return v.cost ? s.costs[static_cast<std::size_t>(v.time)] : s.utilities[static_cast<std::size_t>(v.time)];
  };
  for (const auto& s : d.subjects) {
    if (s.arm != arm) continue;
    const auto va = get(s, a), vb = get(s, b);
    if (va && vb) {
      x.push_back(*va);
      y.push_back(*vb);
    }
  }
  return spearman(x, y);
}

}  // namespace

PpcReport rank_corr_check(const FittedArm arms[2], const PsiPosterior& psi, const TrialDataset& observed,
                          std::size_t n_replicates, std::uint64_t seed) {
  if (n_replicates < 1) fail(ErrorCode::Config, "PPC needs at least one replicate");
  const auto vars = ppc_variables(observed.J);
  PpcReport rep;
  rep.n_replicates = n_replicates;
  for (int arm = 1; arm <= 2; ++arm)
    for (std::size_t a = 0; a < vars.size(); ++a)
      for (std::size_t b = a + 1; b < vars.size(); ++b) {
        PpcPair p;
        p.arm = arm;
        p.a = vars[a].name;
        p.b = vars[b].name;
        p.observed = pair_correlation(observed, arm, vars[a], vars[b]);
        p.skipped = std::isnan(p.observed);
        if (p.skipped)
          rep.notices.push_back("arm " + std::to_string(arm) + " pair " + p.a + "-" + p.b +
                                ": fewer than 3 jointly observed (or constant) values; skipped");
        p.replicated.assign(n_replicates, std::numeric_limits<double>::quiet_NaN());
        rep.pairs.push_back(std::move(p));
      }

  const auto draw_idx = thin_indices(arms[0].completers->total_draws(), n_replicates);
  parallel_for(n_replicates, [&](std::size_t r) {
    Rng rng = make_rng(seed, Stream::Replicate, {static_cast<std::uint64_t>(r)});
    const TrialDataset d = replicate_observed(arms, psi, observed, draw_idx[r % draw_idx.size()], rng);
    std::size_t q = 0;
    for (int arm = 1; arm <= 2; ++arm)
      for (std::size_t a = 0; a < vars.size(); ++a)
        for (std::size_t b = a + 1; b < vars.size(); ++b) rep.pairs[q++].replicated[r] = pair_correlation(d, arm, vars[a], vars[b]);
  });
  for (auto& p : rep.pairs) p.p_value = p.skipped ? std::numeric_limits<double>::quiet_NaN() : ppc_p_value(p.replicated, p.observed);
  return rep;
}

}  // namespace hecon
