#pragma once

// Posterior sampling for one dataset group (an arm's completers, its collapsed
// non-completers, or any subject subset) plus the conjugate pattern-probability
// update.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hurdle_model.hpp"
#include "trial_data.hpp"

namespace hecon {

struct ChainConfig {
  int n_chains = 2;
  int n_iter = 20000;
  int burn_in = 5000;
  int thin = 1;
  std::uint64_t seed = 20190101;
  int adapt_window = 50;
  double target_accept = 0.44;
  std::vector<std::string> zero_mask;
  std::map<std::string, double> fixed;  // parameters held at a value (excluded from updates)
  bool keep_augmented = false;
  PriorWidths prior;

  void validate() const;
  std::size_t kept_per_chain() const;
};

enum class GroupKind { Completers, NonCompleters, All };
std::string to_string(GroupKind g);

struct GroupSubject {
  std::string id;
  std::vector<std::optional<double>> u;  // model [0,1] scale
  std::vector<std::optional<double>> c;
};

struct GroupData {
  int J = 2;
  int arm = 1;
  GroupKind kind = GroupKind::All;
  double cost_floor = 1.0;
  std::vector<GroupSubject> subjects;

  std::size_t size() const { return subjects.size(); }
  std::size_t missing_cells() const;
};

GroupData make_group(const RescaledDataset& data, int arm, GroupKind kind, double cost_floor);

struct DrawMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  DrawMatrix() = default;
  DrawMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::vector<double> column(std::size_t c) const;
};

struct PosteriorDraws {
  int J = 2;
  CostFamily family = CostFamily::LogNormal;
  double cost_floor = 1.0;
  std::vector<std::string> names;
  std::vector<DrawMatrix> chains;  // kept iteration x parameter
  std::vector<std::vector<double>> acceptance;  // per chain, per parameter (NaN for pinned)
  std::set<std::string> zero_mask;
  std::set<std::string> pinned;  // zero-masked or fixed: never updated
  std::vector<std::string> warnings;
  std::vector<std::string> augmented_names;  // "<id>:u<j>" / "<id>:c<j>"
  std::vector<DrawMatrix> augmented;          // per chain, kept iteration x missing cell

  std::size_t n_chains() const { return chains.size(); }
  std::size_t n_kept() const { return chains.empty() ? 0 : chains.front().rows; }
  std::size_t total_draws() const { return n_chains() * n_kept(); }
  /// Pooled draw index d -> (chain d / n_kept, row d % n_kept).
  HurdleParams params_at(std::size_t pooled_index) const;
  HurdleParams params_from_row(const DrawMatrix& m, std::size_t row) const;
  std::vector<std::vector<double>> parameter_chains(std::size_t param) const;
};

/// Pre-fit check: hurdle events (< 2 at a time point) or all-missing outcomes
/// that leave coefficients unidentifiable. Returns human-readable suggestions.
std::vector<std::string> identifiability_warnings(const GroupData& group, const std::set<std::string>& pinned);

PosteriorDraws fit_group(const GroupData& group, CostFamily family, const ChainConfig& config,
                         std::uint64_t stream_id = 0);

/// Full-data log-likelihood of a group with every cell supplied (testing aid for the
/// sampler's factor caches).
double group_loglik(const HurdleParams& p, const GroupData& complete_group);
/// Same quantity computed through the sampler's cached factor sums.
double sampler_factor_loglik(const HurdleParams& p, const GroupData& complete_group);

// --- pattern probabilities ---

struct PatternPrior {
  enum class Type { Structured, Flat } type = Type::Structured;
  double x = 0.2;       // expected total dropout rate
  int R_star = 64;      // number of potential patterns
};

struct ArmPsi {
  int arm = 1;
  std::vector<Signature> categories;  // completer first, then observed non-completer patterns
  std::vector<double> prior_concentration;
  std::vector<double> posterior_concentration;
  std::vector<double> psi_completer;   // draws
  std::vector<std::vector<double>> full_draws;  // draws over categories (may be empty)

  std::vector<double> posterior_mean() const;
};

struct PsiPosterior {
  ArmPsi arms[2];
  const ArmPsi& arm(int t) const { return arms[t - 1]; }
};

PsiPosterior fit_pattern_probs(const PatternTable& patterns, const PatternPrior& prior, std::size_t n_draws,
                               std::uint64_t seed, bool keep_full_draws = false);
std::vector<double> dirichlet_draw(const std::vector<double>& concentration, Rng& rng);

}  // namespace hecon
