#pragma once

// Marginal means under partial identifying restrictions. Non-completer means are
// shifted by sensitivity parameters on the missing share only, then mixed with the
// completer means through the pattern probabilities.

#include <cstdint>
#include <string>
#include <vector>

#include "mcmc.hpp"
#include "trial_data.hpp"

namespace hecon {

enum class ScenarioKind { CompleteCase, Mar, BenchmarkZero, Flat, Skew0, Skew1, Degenerate, CrossSectional };

/// cc, mar, delta0, flat, skew0, skew1, degenerate, cs.
std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);
bool needs_noncompleters(ScenarioKind k);
bool uses_restriction(ScenarioKind k);

/// Per-time observed non-completer standard deviations (utilities on the model scale).
struct Calibration {
  std::vector<double> sd_u, sd_c;
  std::vector<std::string> warnings;
};

struct SensitivityScenario {
  ScenarioKind kind = ScenarioKind::BenchmarkZero;
  std::string name;  // output label; defaults to to_string(kind)
  // Degenerate shifts per time 0..J. delta_u is in model-scale (rescaled) utility units.
  std::vector<double> delta_u, delta_c;

  std::string label() const { return name.empty() ? to_string(kind) : name; }
  /// Checks sign contract (delta_u <= 0, delta_c >= 0) and lengths.
  void validate(int J) const;
};

struct DeltaDraw {
  double u = 0.0;  // <= 0
  double c = 0.0;  // >= 0
};

/// One time point's (Delta^u, Delta^c) for a random family; cost uniform first.
DeltaDraw sample_delta(ScenarioKind kind, double sd_u, double sd_c, Rng& rng);
/// Shifts for every time 0..J.
std::vector<DeltaDraw> sample_delta_path(const SensitivityScenario& scn, const Calibration& cal, Rng& rng);

Calibration calibration_sds(const RescaledDataset& data, int arm);

/// Fraction of an arm's non-completers whose outcome is observed at each time.
struct ObservedShare {
  std::vector<double> w_u, w_c;
  std::vector<std::string> warnings;
};
ObservedShare observed_shares(const RescaledDataset& data, int arm);

enum class UtilityScale { Model, Original };

/// Per draw, per time means.
struct TimeMeans {
  UtilityScale scale = UtilityScale::Model;
  std::vector<std::vector<double>> u, c;
  std::size_t n_draws() const { return u.size(); }
};

/// Working-model marginal means for the selected pooled draws by forward simulation.
/// Each draw uses its own stream (seed, MarginalMeans, stream_id, draw index).
TimeMeans group_time_means(const PosteriorDraws& draws, const std::vector<std::size_t>& draw_index, int n_sims,
                           std::uint64_t seed, std::uint64_t stream_id);

inline double apply_restriction(double m, double w, double delta) { return m + (1.0 - w) * delta; }

/// Non-completer group means after the restriction; Delta is drawn per draw from the
/// stream (seed, Delta, arm, draw index).
TimeMeans restricted_group_means(const TimeMeans& m, const ObservedShare& w, const SensitivityScenario& scn,
                                 const Calibration& cal, std::uint64_t seed, int arm);

/// Per draw mu = psi * completer + (1 - psi) * group. Inputs must be on the model scale.
TimeMeans mix_means(const std::vector<double>& psi_completer, const TimeMeans& completers, const TimeMeans& group);
TimeMeans to_original_scale(const TimeMeans& m, const RescaledDataset& data);

struct MarginalMeans {
  std::string scenario;
  TimeMeans arms[2];
  std::vector<std::string> flags;
  const TimeMeans& arm(int t) const { return arms[t - 1]; }
};

/// Flags (never clips) utility means outside the instrument bounds and negative cost means.
void flag_violations(MarginalMeans& m, double u_min, double u_max);

}  // namespace hecon
