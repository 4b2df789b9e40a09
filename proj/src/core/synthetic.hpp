#pragma once

// Ground-truth trial generator with MCAR, MAR and MNAR masks, plus the true marginal
// means the analyses are scored against.

#include <cstdint>
#include <string>
#include <vector>

#include "hurdle_model.hpp"
#include "mcmc.hpp"
#include "trial_data.hpp"

namespace hecon {

struct Missingness {
  enum class Type { MCAR, MAR, MNAR } type = Type::MCAR;
  double rate = 0.0;          // MCAR per-cell probability
  double intercept = 0.0;     // MAR / MNAR logit intercept
  double log_c0_coef = 0.0;   // MAR: coefficient on log baseline cost
  double u_coef = 0.0;        // MNAR: coefficient on the current model-scale utility
  double log_c_coef = 0.0;    // MNAR: coefficient on the current log cost
  bool joint = false;         // u_j and c_j go missing together (a missed visit)

  void validate() const;
};

struct TruthSpec {
  int J = 2;
  std::size_t n_per_arm = 500;
  std::vector<double> time_unit_fractions{0.5, 0.5};
  double u_min = kEq5dFloor;  // original utility scale is u_min + (u_max - u_min) * u*
  double u_max = kEq5dCeiling;
  HurdleParams arms[2];
  Missingness missingness;
  std::uint64_t seed = 1;
  int truth_sims = 1000000;

  void validate() const;
};

TruthSpec truth_from_json(const std::string& text);
std::string truth_to_json(const TruthSpec& spec);

struct TrueMeans {
  // Per arm, per time; utilities on the original scale.
  std::vector<double> mu_u[2], mu_c[2], se_u[2], se_c[2];
  double mu_e[2] = {0.0, 0.0};
  double mu_c_total[2] = {0.0, 0.0};
};

/// Analytic baseline cost mean; follow-up means by truth_sims forward simulations.
TrueMeans true_means(const TruthSpec& spec, bool include_baseline_cost = false);

struct SyntheticTrial {
  TrialDataset observed;  // original utility scale
  TrialDataset full;
};

SyntheticTrial generate_trial(const TruthSpec& spec);

struct RecoveryRow {
  std::string target;
  double truth = 0.0, mean = 0.0, bias = 0.0, lo = 0.0, hi = 0.0;
  bool covered = false;
};

/// Posterior mean, bias and central 95% interval coverage per row.
RecoveryRow recover_target(const std::string& name, double truth, const std::vector<double>& draws);
std::vector<RecoveryRow> recovery_report(const HurdleParams& truth, const PosteriorDraws& draws);

}  // namespace hecon
