#pragma once

// Convergence diagnostics and draw summaries.

#include <cstddef>
#include <string>
#include <vector>

#include "mcmc.hpp"

namespace hecon {

/// Split-R-hat over chains (each halved). Needs >= 2 chains and >= 10 draws each.
/// Identical constant chains give 1; zero within-chain variance with spread between
/// chains gives +inf.
double rhat(const std::vector<std::vector<double>>& chains);
/// Multi-chain effective sample size with Geyer's initial positive sequence.
/// A constant chain returns the sentinel 1; the result never exceeds the total draw count.
double ess(const std::vector<std::vector<double>>& chains);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Shortest interval holding `mass` of the draws.
Interval hpd(std::vector<double> draws, double mass = 0.95);
/// Central interval by empirical quantiles (type-7 interpolation).
Interval central_interval(std::vector<double> draws, double mass = 0.95);
double quantile(std::vector<double> draws, double q);

struct ParamSummary {
  std::string name;
  double mean = 0.0, sd = 0.0;
  Interval hpd95;
  double rhat = 1.0;
  double ess = 0.0;
  double acceptance = 0.0;  // mean across chains; NaN when pinned
  bool pinned = false;
};

std::vector<ParamSummary> summarize(const PosteriorDraws& draws);
double max_rhat(const std::vector<ParamSummary>& s);

}  // namespace hecon
