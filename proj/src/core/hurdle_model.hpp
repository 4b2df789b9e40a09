#pragma once

// Conditional hurdle model for one (arm, pattern-group) cell. Costs use a zero
// hurdle plus LogNormal or Gamma continuous part; utilities (on the rescaled
// [0,1] scale) use a one hurdle plus a mean/sd-parameterised Beta. The chain is
// c_0 -> u_0 | c_0 -> c_j | (c_{j-1}, u_{j-1}) -> u_j | (c_j, u_{j-1}).

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"

namespace hecon {

enum class CostFamily { LogNormal, Gamma };

std::string to_string(CostFamily f);
CostFamily cost_family_from_string(const std::string& s);

enum class ParamKind { Coefficient, Scale, Probability };

/// Which likelihood factor a parameter enters. Each parameter enters exactly one.
enum class Factor { CostHurdle = 0, CostContinuous = 1, UtilityHurdle = 2, UtilityContinuous = 3 };

struct ParamInfo {
  std::string name;
  ParamKind kind;
  int time;
  Factor factor;
  int slot;  // 0 = intercept/location, 1..2 = slope index, -1 = scale/probability
};

/// Canonical flat layout of all parameters for a model with J follow-ups.
class ParamLayout {
 public:
  explicit ParamLayout(int J);

  int J() const { return J_; }
  std::size_t size() const { return info_.size(); }
  const ParamInfo& operator[](std::size_t i) const { return info_[i]; }
  const std::vector<ParamInfo>& all() const { return info_; }
  std::size_t index(const std::string& name) const;  // throws InvalidArgument when unknown
  std::optional<std::size_t> find(const std::string& name) const;
  std::vector<std::string> names() const;

  // Index helpers; time-0 cost location is nu_c_0, time-0 zero-cost probability pi_c_0.
  static std::size_t nu_c0() { return 0; }
  static std::size_t tau_c0() { return 1; }
  static std::size_t pi_c0() { return 2; }
  static std::size_t alpha0(int k) { return 3 + static_cast<std::size_t>(k); }
  static std::size_t sigma_u0() { return 5; }
  static std::size_t gamma0(int k) { return 6 + static_cast<std::size_t>(k); }
  static std::size_t base(int j) { return 8 + 14 * static_cast<std::size_t>(j - 1); }
  static std::size_t beta(int k, int j) { return base(j) + static_cast<std::size_t>(k); }
  static std::size_t tau_c(int j) { return j == 0 ? tau_c0() : base(j) + 3; }
  static std::size_t zeta(int k, int j) { return base(j) + 4 + static_cast<std::size_t>(k); }
  static std::size_t alpha(int k, int j) { return j == 0 ? alpha0(k) : base(j) + 7 + static_cast<std::size_t>(k); }
  static std::size_t sigma_u(int j) { return j == 0 ? sigma_u0() : base(j) + 10; }
  static std::size_t gamma(int k, int j) { return j == 0 ? gamma0(k) : base(j) + 11 + static_cast<std::size_t>(k); }

 private:
  int J_;
  std::vector<ParamInfo> info_;
};

struct HurdleParams {
  int J = 2;
  CostFamily family = CostFamily::LogNormal;
  double cost_floor = 1.0;  // log(cost_floor) replaces log(0) when a cost covariate is a structural zero
  std::vector<double> values;
  std::set<std::string> zero_mask;

  static HurdleParams zeros(int J, CostFamily family = CostFamily::LogNormal, double cost_floor = 1.0);

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  double get(const std::string& name) const;
  void set(const std::string& name, double v);
  /// Forces zero-masked coefficients to 0 and checks scales/probabilities.
  void validate() const;
  void apply_mask();

  double log_cost_covariate(double c) const { return c > 0.0 ? std::log(c) : std::log(cost_floor); }
};

std::string params_to_json(const HurdleParams& p);
HurdleParams params_from_json(const std::string& text);

struct Trajectory {
  std::vector<double> c, u;
  std::vector<int> dc, du;

  explicit Trajectory(int J = 2)
      : c(static_cast<std::size_t>(J + 1), 0.0), u(static_cast<std::size_t>(J + 1), 0.0),
        dc(static_cast<std::size_t>(J + 1), 0), du(static_cast<std::size_t>(J + 1), 0) {}
  int J() const { return static_cast<int>(c.size()) - 1; }
  /// Sets the value and derives the hurdle indicator from it.
  void set_cost(int j, double v);
  void set_utility(int j, double v);
  bool consistent() const;
};

struct BetaShapes {
  double a;
  double b;
};

/// Mean/sd -> shapes: a = nu*phi, b = (1-nu)*phi, phi = nu(1-nu)/sd^2 - 1.
BetaShapes beta_moments_to_shapes(double mean, double sd);
bool beta_moments_feasible(double mean, double sd);

inline constexpr double kUtilityClamp = 1e-9;

// --- per-factor primitives, shared by likelihood, sampler and simulator ---

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
/// log P(d) for d ~ Bernoulli(logistic(eta)).
inline double log_bernoulli_logit(int d, double eta) { return d ? -softplus(-eta) : -softplus(eta); }

/// Covariates entering time-j regressions: cost blocks use (log c_{j-1}, u_{j-1});
/// utility blocks use (log c_j, u_{j-1}); time 0 has fewer.
struct StepInputs {
  double lc_prev = 0.0;
  double u_prev = 0.0;
  double lc_cur = 0.0;
};

double zero_cost_logit(const HurdleParams& p, int j, const StepInputs& x);  // j >= 1
double zero_cost_prob(const HurdleParams& p, int j, const StepInputs& x);
double cost_location(const HurdleParams& p, int j, const StepInputs& x);
double one_utility_logit(const HurdleParams& p, int j, const StepInputs& x);
double utility_mean_logit(const HurdleParams& p, int j, const StepInputs& x);

double log_cost_hurdle(const HurdleParams& p, int j, const StepInputs& x, int dc);
/// Continuous cost log-density at c > 0 (log_c = log c precomputed).
double log_cost_density(CostFamily family, double c, double log_c, double location, double scale);
double log_utility_hurdle(const HurdleParams& p, int j, const StepInputs& x, int du);
/// Beta log-density with clamping of u into [1e-9, 1-1e-9]; -inf when moments infeasible.
double log_beta_mean_sd(double u, double mean, double sd);

/// Per-time factor contributions of one subject's log-likelihood.
struct LogLikTerms {
  std::vector<double> cost_hurdle, cost_continuous, utility_hurdle, utility_continuous;
  double total() const;
  double block(int j, bool cost) const;  // hurdle + continuous for the c_j or u_j block
};

/// Which responses enter the likelihood. Unmasked by default.
struct ResponseMask {
  std::vector<bool> utility, cost;
  static ResponseMask all(int J);
};

LogLikTerms loglik_terms(const HurdleParams& p, const Trajectory& traj, const ResponseMask* observed = nullptr);
double loglik_subject(const HurdleParams& p, const Trajectory& traj, const ResponseMask* observed = nullptr);

/// Inputs for time-j factors given (possibly imputed) trajectory values.
StepInputs step_inputs(const HurdleParams& p, const Trajectory& traj, int j);

/// Draws (d, value) for the time-j cost and utility given already-filled predecessors.
void simulate_cost(const HurdleParams& p, Trajectory& traj, int j, Rng& rng);
bool simulate_utility(const HurdleParams& p, Trajectory& traj, int j, Rng& rng);  // false when Beta infeasible
/// Continuous part only (d already chosen as 0).
double draw_positive_cost(const HurdleParams& p, int j, const StepInputs& x, Rng& rng);
std::optional<double> draw_interior_utility(const HurdleParams& p, int j, const StepInputs& x, Rng& rng);

inline constexpr int kSimulationRetryCap = 1000;

Trajectory simulate_trajectory(const HurdleParams& p, Rng& rng);

struct PriorWidths {
  double coefficient_sd = 100.0;
  double scale_max = 100.0;
};

double log_prior(const HurdleParams& p, const PriorWidths& hyper = {});

struct MarginalMoments {
  std::vector<double> mean_u, se_u, mean_c, se_c;  // utilities on the model [0,1] scale
};

MarginalMoments marginal_mean_by_mc(const HurdleParams& p, int n_sims, Rng& rng);

}  // namespace hecon
