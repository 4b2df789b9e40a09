#include "mcmc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"
#include "parallel.hpp"
#include "sampler.hpp"

namespace hecon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double safe_logit(double p) { return std::log(p) - std::log1p(-p); }

}  // namespace

void ChainConfig::validate() const {
  if (n_chains < 1) fail(ErrorCode::Config, "n_chains must be at least 1");
  if (n_iter < 1) fail(ErrorCode::Config, "n_iter must be at least 1");
  if (burn_in < 0 || burn_in >= n_iter) fail(ErrorCode::Config, "burn_in must satisfy 0 <= burn_in < n_iter");
  if (thin < 1) fail(ErrorCode::Config, "thin must be at least 1");
  if (adapt_window < 1) fail(ErrorCode::Config, "adapt_window must be at least 1");
  if (!(target_accept > 0.0 && target_accept < 1.0)) fail(ErrorCode::Config, "target_accept must lie in (0,1)");
  if (!(prior.coefficient_sd > 0.0) || !(prior.scale_max > 0.0)) fail(ErrorCode::Config, "prior widths must be positive");
}

std::size_t ChainConfig::kept_per_chain() const {
  return static_cast<std::size_t>((n_iter - burn_in + thin - 1) / thin);
}

std::string to_string(GroupKind g) {
  switch (g) {
    case GroupKind::Completers: return "completers";
    case GroupKind::NonCompleters: return "noncompleters";
    case GroupKind::All: return "all";
  }
  return "all";
}

std::size_t GroupData::missing_cells() const {
  std::size_t n = 0;
  for (const auto& s : subjects) {
    for (const auto& v : s.u) n += !v.has_value();
    for (const auto& v : s.c) n += !v.has_value();
  }
  return n;
}

GroupData make_group(const RescaledDataset& data, int arm, GroupKind kind, double cost_floor) {
  GroupData g;
  g.J = data.base.J;
  g.arm = arm;
  g.kind = kind;
  g.cost_floor = cost_floor;
  for (const auto& s : data.base.subjects) {
    if (s.arm != arm) continue;
    if (kind == GroupKind::Completers && !s.completer()) continue;
    if (kind == GroupKind::NonCompleters && s.completer()) continue;
    g.subjects.push_back({s.id, s.utilities, s.costs});
  }
  return g;
}

std::vector<double> DrawMatrix::column(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
  return out;
}

HurdleParams PosteriorDraws::params_from_row(const DrawMatrix& m, std::size_t row) const {
  HurdleParams p;
  p.J = J;
  p.family = family;
  p.cost_floor = cost_floor;
  p.zero_mask = zero_mask;
  p.values.assign(m.data.begin() + static_cast<std::ptrdiff_t>(row * m.cols),
                  m.data.begin() + static_cast<std::ptrdiff_t>((row + 1) * m.cols));
  return p;
}

HurdleParams PosteriorDraws::params_at(std::size_t pooled_index) const {
  const std::size_t n = n_kept();
  if (n == 0 || pooled_index >= total_draws()) fail(ErrorCode::InvalidArgument, "draw index out of range");
  return params_from_row(chains[pooled_index / n], pooled_index % n);
}

std::vector<std::vector<double>> PosteriorDraws::parameter_chains(std::size_t param) const {
  std::vector<std::vector<double>> out;
  for (const auto& m : chains) out.push_back(m.column(param));
  return out;
}

std::vector<std::string> identifiability_warnings(const GroupData& group, const std::set<std::string>& pinned) {
  std::vector<std::string> out;
  const int J = group.J;
  auto unpinned = [&](std::vector<std::string> names) {
    std::vector<std::string> keep;
    for (auto& n : names)
      if (!pinned.count(n)) keep.push_back(std::move(n));
    return keep;
  };
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s;
  };
  for (int j = 0; j <= J; ++j) {
    const auto t = static_cast<std::size_t>(j);
    std::size_t nu = 0, nc = 0, ones = 0, zeros = 0;
    for (const auto& s : group.subjects) {
      if (s.u[t]) {
        ++nu;
        ones += *s.u[t] >= 1.0;
      }
      if (s.c[t]) {
        ++nc;
        zeros += *s.c[t] <= 0.0;
      }
    }
    const std::string tj = "_" + std::to_string(j);
    if (nc == 0 || nu == 0) {
      out.push_back("time " + std::to_string(j) + ": no observed " + (nc == 0 ? "costs" : "utilities") +
                    "; its coefficients are identified by the prior only");
    }
    if (j > 0 && nc > 0 && (zeros < 2 || nc - zeros < 2)) {
      auto names = unpinned({"zeta_1" + tj, "zeta_2" + tj});
      if (!names.empty())
        out.push_back("time " + std::to_string(j) + ": " + std::to_string(zeros) + " observed zero costs out of " +
                      std::to_string(nc) + "; consider zero-masking " + join(names));
    }
    if (nu > 0 && (ones < 2 || nu - ones < 2)) {
      std::vector<std::string> names{"gamma_1" + tj};
      if (j > 0) names.push_back("gamma_2" + tj);
      names = unpinned(names);
      if (!names.empty())
        out.push_back("time " + std::to_string(j) + ": " + std::to_string(ones) + " observed utilities equal to one out of " +
                      std::to_string(nu) + "; consider zero-masking " + join(names));
    }
  }
  return out;
}

namespace {

// Per-subject working state: responses at every time (observed or imputed) with the
// transforms the factor terms need kept alongside.
class GroupState {
 public:
  GroupState(const GroupData& g, const HurdleParams& p) : J_(g.J), T_(g.J + 1), n_(g.size()), p_(p) {
    const std::size_t N = n_ * static_cast<std::size_t>(T_);
    c_.assign(N, 0.0);
    logc_.assign(N, 0.0);
    lc_.assign(N, 0.0);
    u_.assign(N, 0.5);
    logu_.assign(N, 0.0);
    log1mu_.assign(N, 0.0);
    dc_.assign(N, 0);
    du_.assign(N, 0);
    obs_c_.assign(N, 1);
    obs_u_.assign(N, 1);
    log_floor_ = std::log(p_.cost_floor);
    factor_ll_.assign(4 * static_cast<std::size_t>(T_), 0.0);
    xbar_.assign(4 * static_cast<std::size_t>(T_), {0.0, 0.0, 0.0});
  }

  int J() const { return J_; }
  std::size_t n() const { return n_; }
  HurdleParams& params() { return p_; }
  const HurdleParams& params() const { return p_; }
  std::size_t at(std::size_t i, int j) const { return i * static_cast<std::size_t>(T_) + static_cast<std::size_t>(j); }

  void set_cost(std::size_t s, double v) {
    c_[s] = v;
    dc_[s] = v <= 0.0;
    logc_[s] = v > 0.0 ? std::log(v) : 0.0;
    lc_[s] = v > 0.0 ? logc_[s] : log_floor_;
  }
  void set_utility(std::size_t s, double v) {
    u_[s] = v;
    du_[s] = v >= 1.0;
    const double x = std::clamp(v, kUtilityClamp, 1.0 - kUtilityClamp);
    logu_[s] = std::log(x);
    log1mu_[s] = std::log1p(-x);
  }

  double cost(std::size_t s) const { return c_[s]; }
  double utility(std::size_t s) const { return u_[s]; }
  bool cost_zero(std::size_t s) const { return dc_[s]; }
  bool utility_one(std::size_t s) const { return du_[s]; }
  void mark_missing(std::size_t s, bool cost) { (cost ? obs_c_ : obs_u_)[s] = 0; }
  bool observed(std::size_t s, bool cost) const { return (cost ? obs_c_ : obs_u_)[s]; }

  StepInputs inputs(std::size_t i, int j) const {
    const std::size_t s = at(i, j);
    StepInputs x;
    x.lc_cur = lc_[s];
    if (j > 0) {
      x.lc_prev = lc_[s - 1];
      x.u_prev = u_[s - 1];
    }
    return x;
  }

  // Single-subject factor term; -inf covers every non-finite case so that the samplers
  // can treat it as an outright rejection.
  double term(std::size_t i, int j, Factor f) const {
    using L = ParamLayout;
    const std::size_t s = at(i, j);
    const auto& v = p_.values;
    double r = 0.0;
    switch (f) {
      case Factor::CostHurdle:
        if (j == 0) {
          const double pi = v[L::pi_c0()];
          r = dc_[s] ? std::log(pi) : std::log1p(-pi);
        } else {
          r = log_bernoulli_logit(dc_[s], v[L::zeta(0, j)] + v[L::zeta(1, j)] * lc_[s - 1] + v[L::zeta(2, j)] * u_[s - 1]);
        }
        break;
      case Factor::CostContinuous: {
        if (dc_[s]) return 0.0;
        const double loc =
            j == 0 ? v[L::nu_c0()] : v[L::beta(0, j)] + v[L::beta(1, j)] * lc_[s - 1] + v[L::beta(2, j)] * u_[s - 1];
        const double tau = v[L::tau_c(j)];
        if (p_.family == CostFamily::LogNormal) {
          const double z = (logc_[s] - loc) / tau;
          r = -logc_[s] - std::log(tau) - kHalfLog2Pi - 0.5 * z * z;
        } else {
          const double shape = 1.0 / (tau * tau);
          r = shape * (std::log(shape) - loc) - std::lgamma(shape) + (shape - 1.0) * logc_[s] - shape * std::exp(-loc) * c_[s];
        }
        break;
      }
      case Factor::UtilityHurdle: {
        double eta = v[L::gamma(0, j)] + v[L::gamma(1, j)] * lc_[s];
        if (j > 0) eta += v[L::gamma(2, j)] * u_[s - 1];
        r = log_bernoulli_logit(du_[s], eta);
        break;
      }
      case Factor::UtilityContinuous: {
        if (du_[s]) return 0.0;
        double eta = v[L::alpha(0, j)] + v[L::alpha(1, j)] * lc_[s];
        if (j > 0) eta += v[L::alpha(2, j)] * u_[s - 1];
        const double m = logistic(eta);
        const double sd = v[L::sigma_u(j)];
        const double phi = m * (1.0 - m) / (sd * sd) - 1.0;
        if (!(phi > 0.0)) return kNegInf;
        const double a = m * phi, b = (1.0 - m) * phi;
        if (!(a > 0.0 && b > 0.0)) return kNegInf;
        r = std::lgamma(phi) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * logu_[s] + (b - 1.0) * log1mu_[s];
        break;
      }
    }
    return std::isfinite(r) ? r : kNegInf;
  }

  double factor_sum(int j, Factor f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      s += term(i, j, f);
      if (s == kNegInf) return s;
    }
    return s;
  }

  static std::size_t fidx(int j, Factor f) { return 4 * static_cast<std::size_t>(j) + static_cast<std::size_t>(f); }
  double& cached(int j, Factor f) { return factor_ll_[fidx(j, f)]; }

  void recompute_all() {
    for (int j = 0; j <= J_; ++j)
      for (int f = 0; f < 4; ++f) cached(j, static_cast<Factor>(f)) = factor_sum(j, static_cast<Factor>(f));
  }
  double total() const { return std::accumulate(factor_ll_.begin(), factor_ll_.end(), 0.0); }

  // Covariate means among subjects contributing to each factor, frozen at init; used to
  // shift the intercept with every slope move.
  void freeze_centering() {
    for (int j = 0; j <= J_; ++j) {
      for (int f = 0; f < 4; ++f) {
        const auto fac = static_cast<Factor>(f);
        std::array<double, 3> sum{0.0, 0.0, 0.0};
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n_; ++i) {
          const std::size_t s = at(i, j);
          if (fac == Factor::CostContinuous && dc_[s]) continue;
          if (fac == Factor::UtilityContinuous && du_[s]) continue;
          const bool cost_factor = fac == Factor::CostHurdle || fac == Factor::CostContinuous;
          const double x1 = cost_factor ? (j > 0 ? lc_[s - 1] : 0.0) : lc_[s];
          const double x2 = j > 0 ? u_[s - 1] : 0.0;
          sum[1] += x1;
          sum[2] += x2;
          ++cnt;
        }
        if (cnt) xbar_[fidx(j, fac)] = {0.0, sum[1] / static_cast<double>(cnt), sum[2] / static_cast<double>(cnt)};
      }
    }
  }
  double xbar(int j, Factor f, int slot) const { return xbar_[fidx(j, f)][static_cast<std::size_t>(slot)]; }

 private:
  int J_, T_;
  std::size_t n_;
  HurdleParams p_;
  double log_floor_ = 0.0;
  std::vector<double> c_, logc_, lc_, u_, logu_, log1mu_;
  std::vector<char> dc_, du_, obs_c_, obs_u_;
  std::vector<double> factor_ll_;
  std::vector<std::array<double, 3>> xbar_;
};

GroupState load_state(const GroupData& g, const HurdleParams& p, bool require_complete) {
  GroupState st(g, p);
  const int T = g.J + 1;
  std::vector<double> sum_u(static_cast<std::size_t>(T), 0.0), sum_c(static_cast<std::size_t>(T), 0.0);
  std::vector<std::size_t> n_u(static_cast<std::size_t>(T), 0), n_c(static_cast<std::size_t>(T), 0);
  for (const auto& s : g.subjects) {
    if (static_cast<int>(s.u.size()) != T || static_cast<int>(s.c.size()) != T)
      fail(ErrorCode::Shape, "subject " + s.id + " does not have J+1 measurements");
    for (int j = 0; j < T; ++j) {
      const auto t = static_cast<std::size_t>(j);
      if (s.u[t]) {
        sum_u[t] += *s.u[t];
        ++n_u[t];
      }
      if (s.c[t]) {
        sum_c[t] += *s.c[t];
        ++n_c[t];
      }
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto& s = g.subjects[i];
    for (int j = 0; j < T; ++j) {
      const auto t = static_cast<std::size_t>(j);
      const std::size_t idx = st.at(i, j);
      if (s.c[t]) {
        if (*s.c[t] < 0.0) fail(ErrorCode::Validation, "negative cost for subject " + s.id);
        st.set_cost(idx, *s.c[t]);
      } else {
        if (require_complete) fail(ErrorCode::InvalidArgument, "group has missing cells");
        st.mark_missing(idx, true);
        st.set_cost(idx, n_c[t] ? sum_c[t] / static_cast<double>(n_c[t]) : std::max(1.0, p.cost_floor * 2.0));
      }
      if (s.u[t]) {
        if (!(*s.u[t] >= 0.0 && *s.u[t] <= 1.0))
          fail(ErrorCode::Validation, "utility for subject " + s.id + " is outside the model [0,1] scale");
        st.set_utility(idx, *s.u[t]);
      } else {
        if (require_complete) fail(ErrorCode::InvalidArgument, "group has missing cells");
        st.mark_missing(idx, false);
        double m = n_u[t] ? sum_u[t] / static_cast<double>(n_u[t]) : 0.5;
        st.set_utility(idx, std::clamp(m, 0.01, 1.0));
      }
    }
  }
  return st;
}

// Data-driven starting point: intercepts at empirical (log/logit) means, slopes at 0,
// scales at empirical spreads kept inside the Beta feasibility region.
void initial_values(const GroupData& g, HurdleParams& p) {
  using L = ParamLayout;
  for (int j = 0; j <= g.J; ++j) {
    const auto t = static_cast<std::size_t>(j);
    std::vector<double> lpos, uint;
    std::size_t nc = 0, zeros = 0, nu = 0, ones = 0;
    for (const auto& s : g.subjects) {
      if (s.c[t]) {
        ++nc;
        if (*s.c[t] > 0.0) lpos.push_back(std::log(*s.c[t]));
        else ++zeros;
      }
      if (s.u[t]) {
        ++nu;
        if (*s.u[t] >= 1.0) ++ones;
        else uint.push_back(std::clamp(*s.u[t], 1e-6, 1.0 - 1e-6));
      }
    }
    auto mean_sd = [](const std::vector<double>& v, double fallback_mean, double fallback_sd) {
      if (v.empty()) return std::pair<double, double>{fallback_mean, fallback_sd};
      const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : fallback_sd;
      return std::pair<double, double>{m, sd};
    };
    const auto [lm, lsd] = mean_sd(lpos, 0.0, 1.0);
    const double tau = std::clamp(lsd, 0.05, 5.0);
    const double p_zero = (static_cast<double>(zeros) + 0.5) / (static_cast<double>(nc) + 1.0);
    const double p_one = (static_cast<double>(ones) + 0.5) / (static_cast<double>(nu) + 1.0);
    const auto [um, usd] = mean_sd(uint, 0.5, 0.1);
    const double mean_u = std::clamp(um, 0.02, 0.98);
    const double sigma = std::clamp(usd, 0.005, 0.9 * std::sqrt(mean_u * (1.0 - mean_u)));
    if (j == 0) {
      p[L::nu_c0()] = lm;
      p[L::pi_c0()] = p_zero;
    } else {
      p[L::beta(0, j)] = lm;
      p[L::zeta(0, j)] = safe_logit(p_zero);
    }
    p[L::tau_c(j)] = tau;
    p[L::alpha(0, j)] = safe_logit(mean_u);
    p[L::sigma_u(j)] = sigma;
    p[L::gamma(0, j)] = safe_logit(p_one);
  }
}

class HurdleTarget final : public CoordinateTarget {
 public:
  HurdleTarget(GroupState& st, const PriorWidths& prior) : st_(st), layout_(st.J()), prior_(prior) {
    intercept_.assign(layout_.size(), -1);
    for (std::size_t k = 0; k < layout_.size(); ++k) {
      const auto& info = layout_[k];
      if (info.kind != ParamKind::Coefficient || info.slot <= 0) continue;
      for (std::size_t m = 0; m < layout_.size(); ++m)
        if (layout_[m].factor == info.factor && layout_[m].time == info.time && layout_[m].slot == 0 &&
            layout_[m].kind == ParamKind::Coefficient)
          intercept_[k] = static_cast<long>(m);
    }
  }

  void set_pinned(const std::vector<char>& pinned) { pinned_ = pinned; }
  std::size_t dim() const override { return layout_.size(); }

  double stage(std::size_t k, double step) override {
    auto& v = st_.params().values;
    const auto& info = layout_[k];
    n_saved_ = 0;
    double log_ratio = 0.0;
    auto save = [&](std::size_t i) { saved_[n_saved_++] = {i, v[i]}; };
    const double old = v[k];
    save(k);
    switch (info.kind) {
      case ParamKind::Coefficient: {
        v[k] = old + step;
        log_ratio += coef_prior(v[k]) - coef_prior(old);
        const long ic = intercept_[k];
        if (ic >= 0 && !pinned_[static_cast<std::size_t>(ic)]) {
          const auto i0 = static_cast<std::size_t>(ic);
          const double o0 = v[i0];
          save(i0);
          v[i0] = o0 - step * st_.xbar(info.time, info.factor, info.slot);
          log_ratio += coef_prior(v[i0]) - coef_prior(o0);
        }
        break;
      }
      case ParamKind::Scale: {
        v[k] = old * std::exp(step);
        if (!(v[k] > 0.0 && v[k] < prior_.scale_max)) return kNegInf;
        log_ratio += step;
        break;
      }
      case ParamKind::Probability: {
        v[k] = logistic(safe_logit(old) + step);
        if (!(v[k] > 0.0 && v[k] < 1.0)) return kNegInf;
        log_ratio += std::log(v[k]) + std::log1p(-v[k]) - std::log(old) - std::log1p(-old);
        break;
      }
    }
    staged_sum_ = st_.factor_sum(info.time, info.factor);
    if (staged_sum_ == kNegInf) return kNegInf;
    return log_ratio + staged_sum_ - st_.cached(info.time, info.factor);
  }

  void commit(std::size_t k) override {
    const auto& info = layout_[k];
    st_.cached(info.time, info.factor) = staged_sum_;
  }

  void discard(std::size_t) override {
    auto& v = st_.params().values;
    for (std::size_t i = n_saved_; i-- > 0;) v[saved_[i].first] = saved_[i].second;
  }

 private:
  double coef_prior(double x) const { return -0.5 * (x / prior_.coefficient_sd) * (x / prior_.coefficient_sd); }

  GroupState& st_;
  ParamLayout layout_;
  PriorWidths prior_;
  std::vector<long> intercept_;
  std::vector<char> pinned_;
  std::array<std::pair<std::size_t, double>, 2> saved_{};
  std::size_t n_saved_ = 0;
  double staged_sum_ = 0.0;
};

struct MissingCell {
  std::size_t subject;
  int time;
  bool cost;
};

// Terms whose value depends on the response in the given cell, excluding its own block.
double downstream(const GroupState& st, const MissingCell& m) {
  const int J = st.J();
  double s = 0.0;
  if (m.cost) {
    s += st.term(m.subject, m.time, Factor::UtilityHurdle) + st.term(m.subject, m.time, Factor::UtilityContinuous);
  }
  if (m.time < J) {
    s += st.term(m.subject, m.time + 1, Factor::CostHurdle) + st.term(m.subject, m.time + 1, Factor::CostContinuous);
    if (!m.cost)
      s += st.term(m.subject, m.time + 1, Factor::UtilityHurdle) + st.term(m.subject, m.time + 1, Factor::UtilityContinuous);
  }
  return std::isnan(s) ? kNegInf : s;
}

double own_continuous(const GroupState& st, const MissingCell& m) {
  return st.term(m.subject, m.time, m.cost ? Factor::CostContinuous : Factor::UtilityContinuous);
}

// One data-augmentation pass in chain order: an independence move from the model
// conditional (indicator, then value) followed by a random walk on the continuous value.
void augment(GroupState& st, const std::vector<MissingCell>& cells, Rng& rng) {
  const auto& p = st.params();
  for (const auto& m : cells) {
    const std::size_t s = st.at(m.subject, m.time);
    const double old_value = m.cost ? st.cost(s) : st.utility(s);
    auto put = [&](double v) { m.cost ? st.set_cost(s, v) : st.set_utility(s, v); };
    const StepInputs x = st.inputs(m.subject, m.time);

    const double d_old = downstream(st, m);
    double proposal;
    if (m.cost) {
      const double p0 = zero_cost_prob(p, m.time, x);
      proposal = bernoulli(rng, p0) ? 0.0 : draw_positive_cost(p, m.time, x, rng);
    } else {
      if (bernoulli(rng, logistic(one_utility_logit(p, m.time, x)))) {
        proposal = 1.0;
      } else {
        auto u = draw_interior_utility(p, m.time, x, rng);
        proposal = u ? *u : -1.0;
      }
    }
    if (proposal >= 0.0) {
      put(proposal);
      const double d_new = downstream(st, m);
      const double lr = d_new - d_old;
      if (!(d_new > kNegInf) || !(lr >= 0.0 || std::log(uniform01(rng)) < lr)) put(old_value);
    }

    const double cur = m.cost ? st.cost(s) : st.utility(s);
    if (m.cost ? cur <= 0.0 : cur >= 1.0) continue;
    const double own0 = own_continuous(st, m), down0 = downstream(st, m);
    double next, log_jac;
    if (m.cost) {
      const double step = p[ParamLayout::tau_c(m.time)] * std_normal(rng);
      next = cur * std::exp(step);
      if (!(next > 0.0) || !std::isfinite(next)) continue;
      log_jac = step;
    } else {
      next = logistic(safe_logit(cur) + 0.5 * std_normal(rng));
      if (!(next > kUtilityClamp && next < 1.0 - kUtilityClamp)) continue;
      log_jac = std::log(next) + std::log1p(-next) - std::log(cur) - std::log1p(-cur);
    }
    put(next);
    const double own1 = own_continuous(st, m), down1 = downstream(st, m);
    const double lr = own1 + down1 - own0 - down0 + log_jac;
    if (!(own1 + down1 > kNegInf) || !(lr >= 0.0 || std::log(uniform01(rng)) < lr)) put(cur);
  }
}

struct ChainResult {
  DrawMatrix draws;
  DrawMatrix augmented;
  std::vector<double> acceptance;
};

std::vector<double> curvature_scales(HurdleTarget& target, const std::vector<std::size_t>& active) {
  std::vector<double> out;
  for (std::size_t k : active) {
    double scale = 0.1;
    for (double eps : {1e-3, 1e-2, 1e-1}) {
      const double a = target.stage(k, eps);
      target.discard(k);
      const double b = target.stage(k, -eps);
      target.discard(k);
      const double h = -(a + b) / (eps * eps);
      if (std::isfinite(h) && h > 0.0) {
        scale = 2.4 / std::sqrt(h);
        break;
      }
    }
    out.push_back(std::clamp(scale, 1e-6, 5.0));
  }
  return out;
}

ChainResult run_chain(const GroupData& g, const HurdleParams& start, const std::vector<char>& pinned,
                      const std::vector<MissingCell>& cells, const ChainConfig& cfg, std::uint64_t stream_id,
                      std::size_t chain) {
  GroupState st = load_state(g, start, false);
  HurdleTarget target(st, cfg.prior);
  target.set_pinned(pinned);
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < pinned.size(); ++k)
    if (!pinned[k]) active.push_back(k);

  st.freeze_centering();
  st.recompute_all();
  if (!std::isfinite(st.total()) || !std::isfinite(log_prior(st.params(), cfg.prior)))
    fail(ErrorCode::Numeric, "posterior is not finite at the initial values");
  const std::vector<double> scales = curvature_scales(target, active);

  Rng rng = make_rng(cfg.seed, Stream::Chain, {stream_id, static_cast<std::uint64_t>(chain)});
  // Chain-specific start: one accepted-if-finite jitter per coordinate.
  for (std::size_t s = 0; s < active.size(); ++s) {
    const double lr = target.stage(active[s], 0.5 * scales[s] * std_normal(rng));
    if (std::isfinite(lr)) target.commit(active[s]);
    else target.discard(active[s]);
  }

  AdaptiveMetropolis sampler(active, scales, {cfg.target_accept, cfg.adapt_window});
  ChainResult res;
  const std::size_t kept = cfg.kept_per_chain();
  res.draws = DrawMatrix(kept, pinned.size());
  if (cfg.keep_augmented) res.augmented = DrawMatrix(kept, cells.size());
  std::size_t row = 0;
  for (int it = 0; it < cfg.n_iter; ++it) {
    if (it == cfg.burn_in) sampler.reset_counts();
    sampler.sweep(target, rng, it < cfg.burn_in);
    if (!cells.empty()) {
      augment(st, cells, rng);
      st.recompute_all();
    }
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0) {
      std::copy(st.params().values.begin(), st.params().values.end(),
                res.draws.data.begin() + static_cast<std::ptrdiff_t>(row * pinned.size()));
      if (cfg.keep_augmented)
        for (std::size_t c = 0; c < cells.size(); ++c) {
          const std::size_t s = st.at(cells[c].subject, cells[c].time);
          res.augmented.at(row, c) = cells[c].cost ? st.cost(s) : st.utility(s);
        }
      ++row;
    }
  }
  res.acceptance.assign(pinned.size(), std::numeric_limits<double>::quiet_NaN());
  const auto acc = sampler.acceptance();
  for (std::size_t s = 0; s < active.size(); ++s) res.acceptance[active[s]] = acc[s];
  return res;
}

}  // namespace

PosteriorDraws fit_group(const GroupData& group, CostFamily family, const ChainConfig& config, std::uint64_t stream_id) {
  config.validate();
  if (group.subjects.empty()) fail(ErrorCode::InvalidArgument, "cannot fit an empty group");
  if (!(group.cost_floor > 0.0)) fail(ErrorCode::InvalidArgument, "cost floor must be positive");
  const ParamLayout layout(group.J);

  HurdleParams start = HurdleParams::zeros(group.J, family, group.cost_floor);
  std::vector<char> pinned(layout.size(), 0);
  for (const auto& name : config.zero_mask) {
    const auto i = layout.index(name);
    if (layout[i].kind != ParamKind::Coefficient)
      fail(ErrorCode::Config, "only regression coefficients can be zero-masked: " + name);
    start.zero_mask.insert(name);
    pinned[i] = 1;
  }
  initial_values(group, start);
  start.apply_mask();
  for (const auto& [name, value] : config.fixed) {
    const auto i = layout.index(name);
    start.values[i] = value;
    pinned[i] = 1;
  }
  start.validate();

  PosteriorDraws out;
  out.J = group.J;
  out.family = family;
  out.cost_floor = group.cost_floor;
  out.names = layout.names();
  out.zero_mask = start.zero_mask;
  for (std::size_t k = 0; k < layout.size(); ++k)
    if (pinned[k]) out.pinned.insert(layout[k].name);
  out.warnings = identifiability_warnings(group, out.pinned);

  std::vector<MissingCell> cells;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const auto& s = group.subjects[i];
    for (int j = 0; j <= group.J; ++j) {
      const auto t = static_cast<std::size_t>(j);
      if (!s.c[t]) {
        cells.push_back({i, j, true});
        out.augmented_names.push_back(s.id + ":c" + std::to_string(j));
      }
      if (!s.u[t]) {
        cells.push_back({i, j, false});
        out.augmented_names.push_back(s.id + ":u" + std::to_string(j));
      }
    }
  }

  std::vector<ChainResult> results(static_cast<std::size_t>(config.n_chains));
  parallel_for(results.size(), [&](std::size_t c) { results[c] = run_chain(group, start, pinned, cells, config, stream_id, c); });
  for (auto& r : results) {
    out.chains.push_back(std::move(r.draws));
    out.acceptance.push_back(std::move(r.acceptance));
    if (config.keep_augmented) out.augmented.push_back(std::move(r.augmented));
  }
  return out;
}

double group_loglik(const HurdleParams& p, const GroupData& complete_group) {
  double total = 0.0;
  for (const auto& s : complete_group.subjects) {
    Trajectory t(p.J);
    for (int j = 0; j <= p.J; ++j) {
      const auto k = static_cast<std::size_t>(j);
      if (!s.u[k] || !s.c[k]) fail(ErrorCode::InvalidArgument, "group has missing cells");
      t.set_cost(j, *s.c[k]);
      t.set_utility(j, *s.u[k]);
    }
    total += loglik_subject(p, t);
  }
  return total;
}

double sampler_factor_loglik(const HurdleParams& p, const GroupData& complete_group) {
  GroupState st = load_state(complete_group, p, true);
  st.recompute_all();
  return st.total();
}

// --- pattern probabilities ---

std::vector<double> ArmPsi::posterior_mean() const {
  const double total = std::accumulate(posterior_concentration.begin(), posterior_concentration.end(), 0.0);
  std::vector<double> out;
  for (double a : posterior_concentration) out.push_back(a / total);
  return out;
}

std::vector<double> dirichlet_draw(const std::vector<double>& concentration, Rng& rng) {
  std::vector<double> g(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(concentration[i] > 0.0)) fail(ErrorCode::InvalidArgument, "Dirichlet concentrations must be positive");
    g[i] = gamma_draw(rng, concentration[i]);
    total += g[i];
  }
  if (!(total > 0.0)) {
    // Every gamma underflowed (tiny concentrations): fall back to the largest concentration.
    const auto it = std::max_element(concentration.begin(), concentration.end());
    std::fill(g.begin(), g.end(), 0.0);
    g[static_cast<std::size_t>(it - concentration.begin())] = 1.0;
    return g;
  }
  for (double& x : g) x /= total;
  return g;
}

PsiPosterior fit_pattern_probs(const PatternTable& patterns, const PatternPrior& prior, std::size_t n_draws,
                               std::uint64_t seed, bool keep_full_draws) {
  if (prior.type == PatternPrior::Type::Structured) {
    if (!(prior.x > 0.0 && prior.x < 1.0)) fail(ErrorCode::Config, "pattern prior x must lie in (0,1)");
    if (prior.R_star < 1) fail(ErrorCode::Config, "pattern prior R_star must be at least 1");
  }
  PsiPosterior out;
  for (int arm = 1; arm <= 2; ++arm) {
    const ArmPatterns& ap = patterns.arm(arm);
    ArmPsi& psi = out.arms[arm - 1];
    psi.arm = arm;
    const Signature all_observed(2 * static_cast<std::size_t>(patterns.J + 1), true);
    psi.categories.push_back(all_observed);
    std::vector<double> counts{0.0};
    for (const auto& e : ap.patterns) {
      if (e.completer) {
        counts[0] = static_cast<double>(e.count);
      } else {
        psi.categories.push_back(e.signature);
        counts.push_back(static_cast<double>(e.count));
      }
    }
    const std::size_t R = psi.categories.size();
    for (std::size_t r = 0; r < R; ++r) {
      double a = 1.0;
      if (prior.type == PatternPrior::Type::Structured) a = r == 0 ? 1.0 - prior.x : prior.x / prior.R_star;
      psi.prior_concentration.push_back(a);
      psi.posterior_concentration.push_back(a + counts[r]);
    }
    Rng rng = make_rng(seed, Stream::PatternProbs, {static_cast<std::uint64_t>(arm)});
    for (std::size_t d = 0; d < n_draws; ++d) {
      auto w = dirichlet_draw(psi.posterior_concentration, rng);
      psi.psi_completer.push_back(w[0]);
      if (keep_full_draws) psi.full_draws.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace hecon
