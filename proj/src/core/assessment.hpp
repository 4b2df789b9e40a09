#pragma once

// Observed-data likelihood by Monte Carlo integration, DIC per variable block and
// posterior predictive rank-correlation checks.

#include <cstdint>
#include <string>
#include <vector>

#include "mcmc.hpp"

namespace hecon {

/// Block order c_0, u_0, c_1, u_1, ..., c_J, u_J.
std::vector<std::string> block_names(int J);

struct ObservedLoglik {
  double total = 0.0;
  std::vector<double> block;  // conditional contributions; they sum to total
};

/// log p(y_obs | theta) for one subject. Missing hurdle indicators are enumerated and the
/// M fills are shared out across the enumeration, continuous parts simulated from the model
/// conditionals in chain order. Exact for fully observed subjects.
ObservedLoglik observed_data_loglik(const HurdleParams& p, const GroupSubject& subject, int M, Rng& rng);

struct DicBlock {
  std::string name;
  double d_bar = 0.0, d_hat = 0.0, p_d = 0.0, dic = 0.0;
};

struct DicReport {
  CostFamily family = CostFamily::LogNormal;
  int M_bar = 200;
  int M_hat = 5000;
  std::size_t n_draws = 0;
  std::vector<DicBlock> blocks;
  DicBlock total;
  std::vector<std::string> warnings;

  /// Adds another group's blocks (same family/M, blocks aligned).
  void accumulate(const DicReport& other);
};

struct DicSettings {
  int M_bar = 200;
  int M_hat = 5000;
  std::size_t max_draws = 200;  // evenly thinned subset of pooled draws; 0 = all
  std::uint64_t seed = 1;
  std::uint64_t stream_id = 0;
};

/// Plug-in parameters: posterior mean with scales on the log and probabilities on the logit scale.
HurdleParams posterior_mean_params(const PosteriorDraws& draws);
HurdleParams posterior_median_params(const PosteriorDraws& draws);

DicReport dic(const PosteriorDraws& draws, const GroupData& group, const DicSettings& settings);

/// Evenly spaced pooled-draw indices (all when max_draws is 0 or exceeds the total).
std::vector<std::size_t> thin_indices(std::size_t total, std::size_t max_draws);

/// Spearman correlation with average ranks for ties; NaN when a side is constant or n < 3.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct PpcPair {
  int arm = 1;
  std::string a, b;  // variable names, e.g. "u0", "c1"
  double observed = 0.0;
  std::vector<double> replicated;  // NaN where fewer than 3 jointly observed
  double p_value = 1.0;
  bool skipped = false;  // observed data has fewer than 3 jointly observed
};

struct PpcReport {
  std::size_t n_replicates = 0;
  std::vector<PpcPair> pairs;
  std::vector<std::string> notices;
};

/// 2 * min(P(rep <= obs), P(rep >= obs)), capped at 1; NaN replicates ignored.
double ppc_p_value(const std::vector<double>& replicated, double observed);

struct FittedArm {
  const PosteriorDraws* completers = nullptr;
  const PosteriorDraws* noncompleters = nullptr;  // may be null when the arm has no non-completers
};

/// One replicated observed dataset (model scale) for pooled draw `draw` of both groups.
TrialDataset replicate_observed(const FittedArm arms[2], const PsiPosterior& psi, const TrialDataset& shape,
                                std::size_t draw, Rng& rng);

PpcReport rank_corr_check(const FittedArm arms[2], const PsiPosterior& psi, const TrialDataset& observed,
                          std::size_t n_replicates, std::uint64_t seed);

}  // namespace hecon
