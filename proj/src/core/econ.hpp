#pragma once

// Health-economic summaries of per-draw marginal means: QALYs and total costs per
// arm, increments, ICER, acceptability curve and cost-effectiveness plane export.

#include <cstdint>
#include <string>
#include <vector>

#include "extrapolation.hpp"
#include "trial_data.hpp"

namespace hecon {

/// Trapezoid QALYs over follow-up: sum_{j>=1} (u_j + u_{j-1}) * delta_j / 2.
double qaly(const std::vector<double>& u, const std::vector<double>& fractions);
/// sum_{j>=1} c_j, plus c_0 when include_baseline.
double total_cost(const std::vector<double>& c, bool include_baseline = false);

struct ArmEcon {
  std::vector<double> mu_e, mu_c;  // per draw
};

ArmEcon aggregate_qaly_cost(const TimeMeans& means, const std::vector<double>& fractions, bool include_baseline = false);

std::vector<double> k_grid(double k_max, double k_step);

/// mean(dc) / mean(de); throws when mean(de) is exactly 0.
double icer(const std::vector<double>& delta_e, const std::vector<double>& delta_c);

struct CeacPoint {
  double k;
  double probability;
};
/// Share of draws with k * de - dc > 0; a zero margin counts as not cost-effective.
std::vector<CeacPoint> ceac(const std::vector<double>& delta_e, const std::vector<double>& delta_c,
                            const std::vector<double>& ks);

struct CepPoint {
  double delta_e, delta_c;
  bool in_area;
};
std::vector<CepPoint> cep_export(const std::vector<double>& delta_e, const std::vector<double>& delta_c, double k);

struct EconSummary {
  ArmEcon arms[2];
  std::vector<double> delta_e, delta_c;
  double icer = 0.0;
  std::vector<CeacPoint> ceac;
};

EconSummary summarize_econ(const ArmEcon& control, const ArmEcon& intervention, const std::vector<double>& ks);

/// Bayesian bivariate normal regression of (e_i, c_i) on arm, centred baseline utility and
/// baseline cost among completers (Jeffreys prior, exact draws). Returns adjusted arm means
/// at the pooled baseline means. Utilities must be on the original scale.
struct ComparatorResult {
  ArmEcon arms[2];
  std::vector<double> coefficient_mean;  // 4 x 2 row-major posterior mean of B
};
ComparatorResult cross_sectional_comparator(const TrialDataset& data, std::size_t n_draws, std::uint64_t seed,
                                            bool include_baseline = false);

}  // namespace hecon
