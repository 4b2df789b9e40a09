#pragma once

// Reference computations written against Boost.Math and closed forms. Nothing here
// calls into the library's density or likelihood code; parameters are looked up by
// name so that a layout mistake in the library cannot cancel out.

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/lognormal.hpp>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

using Named = std::map<std::string, double>;

inline double at(const Named& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) throw std::runtime_error("oracle: missing parameter " + name);
  return it->second;
}

inline std::string nm(const char* stem, int k, int j) { return std::string(stem) + "_" + std::to_string(k) + "_" + std::to_string(j); }

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double log_bern(int d, double p) { return d ? std::log(p) : std::log(1.0 - p); }

inline double log_lognormal(double c, double loc, double scale) {
  return std::log(boost::math::pdf(boost::math::lognormal_distribution<double>(loc, scale), c));
}

// Mean exp(loc), coefficient of variation scale.
inline double log_gamma_mean(double c, double loc, double scale) {
  const double k = 1.0 / (scale * scale);
  return std::log(boost::math::pdf(boost::math::gamma_distribution<double>(k, std::exp(loc) / k), c));
}

inline double log_beta_ms(double u, double mean, double sd) {
  const double phi = mean * (1.0 - mean) / (sd * sd) - 1.0;
  return std::log(boost::math::pdf(boost::math::beta_distribution<double>(mean * phi, (1.0 - mean) * phi), u));
}

struct Traj {
  std::vector<double> c, u;  // c == 0 is a structural zero, u == 1 a structural one
};

struct Model {
  int J = 2;
  bool gamma_costs = false;
  double floor = 1.0;
  Named p;

  double lc(double c) const { return c > 0.0 ? std::log(c) : std::log(floor); }

  double cost_term(const Traj& t, int j) const {
    const double c = t.c[j];
    double p0, loc, scale;
    if (j == 0) {
      p0 = at(p, "pi_c_0");
      loc = at(p, "nu_c_0");
      scale = at(p, "tau_c_0");
    } else {
      const double x1 = lc(t.c[j - 1]), x2 = t.u[j - 1];
      p0 = expit(at(p, nm("zeta", 0, j)) + at(p, nm("zeta", 1, j)) * x1 + at(p, nm("zeta", 2, j)) * x2);
      loc = at(p, nm("beta", 0, j)) + at(p, nm("beta", 1, j)) * x1 + at(p, nm("beta", 2, j)) * x2;
      scale = at(p, "tau_c_" + std::to_string(j));
    }
    if (c == 0.0) return std::log(p0);
    return std::log(1.0 - p0) + (gamma_costs ? log_gamma_mean(c, loc, scale) : log_lognormal(c, loc, scale));
  }

  double utility_term(const Traj& t, int j) const {
    const double x1 = lc(t.c[j]);
    double eg = at(p, nm("gamma", 0, j)) + at(p, nm("gamma", 1, j)) * x1;
    double ea = at(p, nm("alpha", 0, j)) + at(p, nm("alpha", 1, j)) * x1;
    if (j > 0) {
      eg += at(p, nm("gamma", 2, j)) * t.u[j - 1];
      ea += at(p, nm("alpha", 2, j)) * t.u[j - 1];
    }
    const double p1 = expit(eg);
    if (t.u[j] == 1.0) return std::log(p1);
    return std::log(1.0 - p1) + log_beta_ms(t.u[j], expit(ea), at(p, "sigma_u_" + std::to_string(j)));
  }

  // Point value a near-degenerate continuous part collapses onto.
  double cost_point(const Traj& t, int j) const {
    if (j == 0) return std::exp(at(p, "nu_c_0"));
    const double x1 = lc(t.c[j - 1]), x2 = t.u[j - 1];
    return std::exp(at(p, nm("beta", 0, j)) + at(p, nm("beta", 1, j)) * x1 + at(p, nm("beta", 2, j)) * x2);
  }
  double utility_point(const Traj& t, int j) const {
    double ea = at(p, nm("alpha", 0, j)) + at(p, nm("alpha", 1, j)) * lc(t.c[j]);
    if (j > 0) ea += at(p, nm("alpha", 2, j)) * t.u[j - 1];
    return expit(ea);
  }
  double zero_cost_prob(const Traj& t, int j) const {
    if (j == 0) return at(p, "pi_c_0");
    return expit(at(p, nm("zeta", 0, j)) + at(p, nm("zeta", 1, j)) * lc(t.c[j - 1]) + at(p, nm("zeta", 2, j)) * t.u[j - 1]);
  }
  double one_utility_prob(const Traj& t, int j) const {
    double eg = at(p, nm("gamma", 0, j)) + at(p, nm("gamma", 1, j)) * lc(t.c[j]);
    if (j > 0) eg += at(p, nm("gamma", 2, j)) * t.u[j - 1];
    return expit(eg);
  }

  double loglik(const Traj& t) const {
    double s = 0.0;
    for (int j = 0; j <= J; ++j) s += cost_term(t, j) + utility_term(t, j);
    return s;
  }
};

/// Observed-data likelihood by brute force when every missing continuous part is a point
/// mass: sum over the structural/non-structural choice of each missing cell.
/// `cmiss[j]`, `umiss[j]` mark missing cells; their entries in `t` are ignored.
inline double enumerate_observed(const Model& m, Traj t, const std::vector<bool>& cmiss, const std::vector<bool>& umiss) {
  std::function<double(int, bool)> rec = [&](int j, bool cost) -> double {
    if (j > m.J) return 1.0;
    const int nj = cost ? j : j + 1;
    const bool ncost = !cost;
    if (cost) {
      if (!cmiss[j]) return std::exp(m.cost_term(t, j)) * rec(nj, ncost);
      const double p0 = m.zero_cost_prob(t, j);
      const double keep = t.c[j];
      t.c[j] = 0.0;
      double s = p0 * rec(nj, ncost);
      t.c[j] = m.cost_point(t, j);
      s += (1.0 - p0) * rec(nj, ncost);
      t.c[j] = keep;
      return s;
    }
    if (!umiss[j]) return std::exp(m.utility_term(t, j)) * rec(nj, ncost);
    const double p1 = m.one_utility_prob(t, j);
    const double keep = t.u[j];
    t.u[j] = 1.0;
    double s = p1 * rec(nj, ncost);
    t.u[j] = m.utility_point(t, j);
    s += (1.0 - p1) * rec(nj, ncost);
    t.u[j] = keep;
    return s;
  };
  return std::log(rec(0, true));
}

/// Posterior of (a, b) for y_i ~ N(a + b x_i, s^2) with independent N(0, s0^2) priors.
struct NormalNormal {
  double mean[2], sd[2], corr;
};

inline NormalNormal normal_normal_posterior(const std::vector<double>& x, const std::vector<double>& y, double s, double s0) {
  double p00 = 1.0 / (s0 * s0), p01 = 0.0, p11 = 1.0 / (s0 * s0), r0 = 0.0, r1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    p00 += 1.0 / (s * s);
    p01 += x[i] / (s * s);
    p11 += x[i] * x[i] / (s * s);
    r0 += y[i] / (s * s);
    r1 += x[i] * y[i] / (s * s);
  }
  const double det = p00 * p11 - p01 * p01;
  const double v00 = p11 / det, v11 = p00 / det, v01 = -p01 / det;
  NormalNormal out;
  out.mean[0] = v00 * r0 + v01 * r1;
  out.mean[1] = v01 * r0 + v11 * r1;
  out.sd[0] = std::sqrt(v00);
  out.sd[1] = std::sqrt(v11);
  out.corr = v01 / std::sqrt(v00 * v11);
  return out;
}

/// Monte Carlo standard error of a chain mean by non-overlapping batch means.
inline double batch_means_se(const std::vector<double>& x, std::size_t batches = 50) {
  const std::size_t b = x.size() / batches;
  std::vector<double> m(batches, 0.0);
  double grand = 0.0;
  for (std::size_t k = 0; k < batches; ++k) {
    for (std::size_t i = 0; i < b; ++i) m[k] += x[k * b + i];
    m[k] /= static_cast<double>(b);
    grand += m[k];
  }
  grand /= static_cast<double>(batches);
  double ss = 0.0;
  for (double v : m) ss += (v - grand) * (v - grand);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sd_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

}  // namespace oracle
