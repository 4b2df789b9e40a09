#pragma once

// Componentwise adaptive random-walk Metropolis. Targets expose one coordinate
// at a time so that an update only re-evaluates the factors that coordinate
// enters.

#include <cstddef>
#include <vector>

#include "rng.hpp"

namespace hecon {

class CoordinateTarget {
 public:
  virtual ~CoordinateTarget() = default;
  virtual std::size_t dim() const = 0;
  /// Stages a move of coordinate k by `step` on its unconstrained scale and returns
  /// log pi(proposed) - log pi(current); -inf rejects.
  virtual double stage(std::size_t k, double step) = 0;
  virtual void commit(std::size_t k) = 0;
  virtual void discard(std::size_t k) = 0;
};

struct AdaptationSettings {
  double target_accept = 0.44;
  int window = 50;
};

class AdaptiveMetropolis {
 public:
  AdaptiveMetropolis(std::vector<std::size_t> active, std::vector<double> initial_scales, AdaptationSettings settings);

  /// One pass over the active coordinates in order. Scales move only when `adapt` is set,
  /// at the end of each completed window.
  void sweep(CoordinateTarget& target, Rng& rng, bool adapt);
  void reset_counts();

  const std::vector<std::size_t>& active() const { return active_; }
  double scale(std::size_t slot) const;
  /// Acceptance rate per active coordinate since the last reset_counts().
  std::vector<double> acceptance() const;

 private:
  std::vector<std::size_t> active_;
  std::vector<double> log_scale_;
  std::vector<std::size_t> window_accepts_;
  std::vector<std::size_t> accepts_, proposals_;
  AdaptationSettings settings_;
  int window_fill_ = 0;
  int windows_done_ = 0;
};

}  // namespace hecon
