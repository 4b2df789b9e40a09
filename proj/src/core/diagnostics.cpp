#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace hecon {

namespace {

double mean_of(const std::vector<double>& v, std::size_t b, std::size_t e) {
  double s = 0.0;
  for (std::size_t i = b; i < e; ++i) s += v[i];
  return s / static_cast<double>(e - b);
}

double var_of(const std::vector<double>& v, std::size_t b, std::size_t e, double m) {
  double s = 0.0;
  for (std::size_t i = b; i < e; ++i) s += (v[i] - m) * (v[i] - m);
  return s / static_cast<double>(e - b - 1);
}

// Autocovariance at one lag (biased, divisor n).
double autocov_lag(const std::vector<double>& x, double m, std::size_t k) {
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i + k < n; ++i) s += (x[i] - m) * (x[i + k] - m);
  return s / static_cast<double>(n);
}

}  // namespace

double rhat(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) fail(ErrorCode::InvalidArgument, "R-hat needs at least 2 chains");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 10) fail(ErrorCode::InvalidArgument, "R-hat needs at least 10 kept draws per chain");
  const std::size_t half = n / 2;
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    for (std::size_t h = 0; h < 2; ++h) {
      const std::size_t b = h * half;
      const double m = mean_of(c, b, b + half);
      means.push_back(m);
      vars.push_back(var_of(c, b, b + half, m));
    }
  }
  const double m = static_cast<double>(means.size());
  const double L = static_cast<double>(half);
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
  double B = 0.0;
  for (double x : means) B += (x - grand) * (x - grand);
  B *= L / (m - 1.0);
  const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
  const double scale = std::max(1.0, std::abs(grand));
  if (W <= 1e-300 * scale) return B <= 1e-24 * scale * scale ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (L - 1.0) / L * W + B / L;
  return std::sqrt(var_plus / W);
}

double ess(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) fail(ErrorCode::InvalidArgument, "ESS needs at least one chain");
  std::size_t n = chains.front().size();
  for (const auto& c : chains) n = std::min(n, c.size());
  if (n < 4) fail(ErrorCode::InvalidArgument, "ESS needs at least 4 draws per chain");
  const double m = static_cast<double>(chains.size());
  const double N = static_cast<double>(n);
  const std::size_t max_lag = n - 1;

  std::vector<std::vector<double>> xs;
  std::vector<double> cmeans;
  for (const auto& c : chains) {
    xs.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n));
    cmeans.push_back(mean_of(xs.back(), 0, n));
  }
  double W = 0.0;
  for (std::size_t c = 0; c < xs.size(); ++c) W += autocov_lag(xs[c], cmeans[c], 0) * N / (N - 1.0);
  W /= m;
  double B = 0.0;
  if (chains.size() > 1) {
    const double g = std::accumulate(cmeans.begin(), cmeans.end(), 0.0) / m;
    for (double x : cmeans) B += (x - g) * (x - g);
    B /= (m - 1.0);
  }
  const double var_plus = W * (N - 1.0) / N + B;
  if (!(var_plus > 0.0) || !std::isfinite(var_plus)) return 1.0;

  // Lags are computed on demand; the sequence truncates long before n for mixing chains.
  auto rho = [&](std::size_t t) {
    double s = 0.0;
    for (std::size_t c = 0; c < xs.size(); ++c) s += autocov_lag(xs[c], cmeans[c], t);
    return 1.0 - (W - s / m) / var_plus;
  };
  // Geyer: sum pairs rho(2k) + rho(2k+1) while positive, forced monotone.
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 <= max_lag; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum += pair;
  }
  const double tau = -1.0 + 2.0 * sum;
  const double total = m * N;
  if (!(tau > 0.0)) return total;
  return std::clamp(total / tau, 1.0, total);
}

double quantile(std::vector<double> draws, double q) {
  if (draws.empty()) fail(ErrorCode::InvalidArgument, "quantile of an empty sample");
  std::sort(draws.begin(), draws.end());
  const double h = (static_cast<double>(draws.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, draws.size() - 1);
  return draws[lo] + (h - static_cast<double>(lo)) * (draws[hi] - draws[lo]);
}

Interval central_interval(std::vector<double> draws, double mass) {
  const double a = (1.0 - mass) / 2.0;
  return {quantile(draws, a), quantile(draws, 1.0 - a)};
}

Interval hpd(std::vector<double> draws, double mass) {
  if (draws.empty()) fail(ErrorCode::InvalidArgument, "HPD of an empty sample");
  if (!(mass > 0.0 && mass <= 1.0)) fail(ErrorCode::InvalidArgument, "HPD mass must lie in (0,1]");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  const auto k = std::min(n - 1, static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n))) - 1);
  Interval best{draws.front(), draws.back()};
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + k < n; ++i) {
    const double w = draws[i + k] - draws[i];
    if (w < width) {
      width = w;
      best = {draws[i], draws[i + k]};
    }
  }
  return best;
}

std::vector<ParamSummary> summarize(const PosteriorDraws& draws) {
  std::vector<ParamSummary> out;
  const bool multi = draws.n_chains() >= 2 && draws.n_kept() >= 10;
  for (std::size_t k = 0; k < draws.names.size(); ++k) {
    ParamSummary s;
    s.name = draws.names[k];
    s.pinned = draws.pinned.count(s.name) > 0;
    const auto chains = draws.parameter_chains(k);
    std::vector<double> pooled;
    for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
    s.mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / static_cast<double>(pooled.size());
    double ss = 0.0;
    for (double x : pooled) ss += (x - s.mean) * (x - s.mean);
    s.sd = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
    s.hpd95 = hpd(pooled, 0.95);
    s.rhat = multi ? rhat(chains) : std::numeric_limits<double>::quiet_NaN();
    s.ess = draws.n_kept() >= 4 ? ess(chains) : static_cast<double>(pooled.size());
    double acc = 0.0;
    for (const auto& a : draws.acceptance) acc += a[k];
    s.acceptance = draws.acceptance.empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : acc / static_cast<double>(draws.acceptance.size());
    out.push_back(s);
  }
  return out;
}

double max_rhat(const std::vector<ParamSummary>& s) {
  double m = 1.0;
  for (const auto& p : s)
    if (!p.pinned && !std::isnan(p.rhat)) m = std::max(m, p.rhat);
  return m;
}

}  // namespace hecon
