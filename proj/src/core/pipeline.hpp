#pragma once

// End-to-end commands driven by one JSON run configuration: simulate, fit, evaluate
// and assess. Every output file is written beneath the configured run directory.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "assessment.hpp"
#include "extrapolation.hpp"
#include "mcmc.hpp"
#include "trial_data.hpp"

namespace hecon {

struct RunConfig {
  std::string base_dir = ".";  // relative paths resolve against this
  std::optional<std::string> dataset;
  std::optional<std::string> truth_path;
  std::optional<std::string> truth_inline;  // JSON text
  int J = 2;
  std::vector<double> time_unit_fractions;
  CsvSchema schema;
  RescaleMode rescale = RescaleMode::TheoreticalBounds;
  double u_min = kEq5dFloor, u_max = kEq5dCeiling;
  ChainConfig chain;
  std::vector<CostFamily> families{CostFamily::LogNormal};
  // Group key ("arm1_completers", "arm2_noncompleters", ...) or "*" -> zero-masked names.
  std::map<std::string, std::vector<std::string>> zero_mask;
  PatternPrior pattern_prior;
  std::vector<SensitivityScenario> scenarios;
  double k_max = 40000.0, k_step = 100.0, k_cep = 25000.0;
  int n_sims = 2000;
  std::size_t eval_draws = 3000;
  bool include_baseline_cost = false;
  std::optional<double> cost_floor;
  int M_bar = 200, M_hat = 5000;
  std::size_t dic_draws = 200;
  std::size_t ppc_replicates = 1000;
  std::string out = "run";
  std::uint64_t seed = 20190101;

  std::string resolve(const std::string& path) const;
  std::string out_dir() const { return resolve(out); }
  void validate() const;
};

/// Parses a configuration document; `overrides` (a JSON object, may be empty) is merged
/// on top key by key before parsing.
RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir, const std::string& overrides = "");
RunConfig load_run_config(const std::string& path, const std::string& overrides = "");

struct CommandReport {
  std::string command;
  std::string out_dir;
  std::vector<std::string> files;  // relative to out_dir
  std::vector<std::string> warnings;
  double max_rhat = 1.0;
  bool rhat_exceeded = false;  // some R-hat above 1.1
  std::string details = "{}";  // command-specific JSON

  std::string to_json() const;
};

CommandReport cmd_simulate(const RunConfig& cfg);
CommandReport cmd_fit(const RunConfig& cfg);
CommandReport cmd_evaluate(const RunConfig& cfg);
CommandReport cmd_assess(const RunConfig& cfg);
CommandReport run_command(const std::string& name, const RunConfig& cfg);

/// Draws CSV round trip (iteration, chain, parameter columns).
std::string draws_to_csv(const PosteriorDraws& d, const std::string& meta_line, const ChainConfig& cfg);
PosteriorDraws draws_from_csv(const std::string& text, int J, CostFamily family, double cost_floor);

}  // namespace hecon
