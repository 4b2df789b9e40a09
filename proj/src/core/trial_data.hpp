#pragma once

// Longitudinal trial data: subjects with (utility, cost) measurements at times
// 0..J, missingness masks, CSV/JSON ingestion, pattern classification and
// utility rescaling onto [0, 1].

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hecon {

inline constexpr double kEq5dFloor = -0.594;
inline constexpr double kEq5dCeiling = 1.0;

/// Observation indicators in Table order: (r^u_0, r^c_0; r^u_1, r^c_1; ...).
using Signature = std::vector<bool>;

struct SubjectRecord {
  std::string id;
  int arm = 1;  // 1 = control, 2 = intervention
  std::vector<std::optional<double>> utilities;
  std::vector<std::optional<double>> costs;

  int J() const { return static_cast<int>(utilities.size()) - 1; }
  bool utility_observed(int j) const { return utilities[static_cast<std::size_t>(j)].has_value(); }
  bool cost_observed(int j) const { return costs[static_cast<std::size_t>(j)].has_value(); }
  Signature signature() const;
  bool completer() const;
};

struct TrialDataset {
  std::vector<SubjectRecord> subjects;
  int J = 2;
  std::vector<double> time_unit_fractions{0.5, 0.5};
  double u_min_theory = kEq5dFloor;
  double u_max_theory = kEq5dCeiling;

  std::size_t arm_size(int arm) const;
  /// Throws Validation on broken invariants (shared J, bounds, fractions, arm coverage).
  void validate(bool require_both_arms = true) const;
  TrialDataset filtered(int arm) const;
};

struct CsvSchema {
  std::string id_column = "id";
  std::string arm_column = "arm";
  std::vector<std::string> utility_columns;  // empty: u0..uJ
  std::vector<std::string> cost_columns;     // empty: c0..cJ
  std::string missing = "NA";

  std::string utility_column(int j) const;
  std::string cost_column(int j) const;
};

struct ParseOptions {
  CsvSchema schema;
  std::vector<double> time_unit_fractions;  // empty: equal split of one time unit
  double u_min_theory = kEq5dFloor;
  double u_max_theory = kEq5dCeiling;
};

TrialDataset parse_trial_csv(std::istream& source, int J, const ParseOptions& options = {});
TrialDataset parse_trial_csv_text(const std::string& text, int J, const ParseOptions& options = {});
TrialDataset load_trial_csv(const std::string& path, int J, const ParseOptions& options = {});
void write_trial_csv(std::ostream& out, const TrialDataset& data, const CsvSchema& schema = {});
std::string trial_to_json(const TrialDataset& data);
TrialDataset trial_from_json(const std::string& text);

struct PatternEntry {
  Signature signature;
  std::size_t count = 0;
  std::vector<std::optional<double>> mean_u;  // within-pattern observed means; nullopt when absent
  std::vector<std::optional<double>> mean_c;
  bool completer = false;
};

struct ArmPatterns {
  int arm = 1;
  std::vector<PatternEntry> patterns;  // descending lexicographic signature order (completers first)
  std::size_t n_subjects = 0;
  std::size_t R() const { return patterns.size(); }
  const PatternEntry* completer_entry() const;
};

struct PatternTable {
  int J = 2;
  ArmPatterns arms[2];
  const ArmPatterns& arm(int t) const { return arms[t - 1]; }
};

PatternTable classify_patterns(const TrialDataset& data);
std::string signature_string(const Signature& s);
std::string pattern_table_to_json(const PatternTable& table);

enum class RescaleMode { TheoreticalBounds, ObservedMinMax };

struct RescaledDataset {
  TrialDataset base;  // utilities on [0, 1]
  std::vector<double> rescale_min;
  std::vector<double> rescale_max;
  std::vector<bool> structural_one_preserved;  // max_j equals the instrument ceiling
  RescaleMode mode = RescaleMode::TheoreticalBounds;
  double original_u_min = kEq5dFloor;
  double original_u_max = kEq5dCeiling;

  double to_original(int j, double u_star) const;
  double to_model(int j, double u) const;
  double span(int j) const { return rescale_max[static_cast<std::size_t>(j)] - rescale_min[static_cast<std::size_t>(j)]; }
};

RescaledDataset rescale_utilities(const TrialDataset& data, RescaleMode mode = RescaleMode::TheoreticalBounds);
TrialDataset invert_rescaling(const RescaledDataset& data);

struct CompletionSplit {
  TrialDataset completers;
  TrialDataset noncompleters;
};

/// Per-arm split; the returned datasets keep both arms' subjects, filter by arm as needed.
CompletionSplit split_by_completion(const TrialDataset& data);

/// Half the smallest positive observed cost; 1 when no positive cost exists.
double default_cost_floor(const TrialDataset& data);

}  // namespace hecon
