#include "sampler.hpp"

#include <cmath>

#include "error.hpp"

namespace hecon {

AdaptiveMetropolis::AdaptiveMetropolis(std::vector<std::size_t> active, std::vector<double> initial_scales,
                                       AdaptationSettings settings)
    : active_(std::move(active)), settings_(settings) {
  if (initial_scales.size() != active_.size()) fail(ErrorCode::InvalidArgument, "one initial scale per coordinate");
  if (settings_.window < 1) fail(ErrorCode::Config, "adaptation window must be positive");
  for (double s : initial_scales) {
    if (!(s > 0.0)) fail(ErrorCode::InvalidArgument, "initial proposal scales must be positive");
    log_scale_.push_back(std::log(s));
  }
  window_accepts_.assign(active_.size(), 0);
  accepts_.assign(active_.size(), 0);
  proposals_.assign(active_.size(), 0);
}

void AdaptiveMetropolis::sweep(CoordinateTarget& target, Rng& rng, bool adapt) {
  for (std::size_t s = 0; s < active_.size(); ++s) {
    const std::size_t k = active_[s];
    const double step = std::exp(log_scale_[s]) * std_normal(rng);
    const double log_ratio = target.stage(k, step);
    ++proposals_[s];
    if (log_ratio >= 0.0 || std::log(uniform01(rng)) < log_ratio) {
      target.commit(k);
      ++accepts_[s];
      ++window_accepts_[s];
    } else {
      target.discard(k);
    }
  }
  if (!adapt) return;
  if (++window_fill_ < settings_.window) return;
  ++windows_done_;
  const double gain = 3.0 / std::sqrt(static_cast<double>(windows_done_));
  for (std::size_t s = 0; s < active_.size(); ++s) {
    const double rate = static_cast<double>(window_accepts_[s]) / settings_.window;
    log_scale_[s] += gain * (rate - settings_.target_accept);
    window_accepts_[s] = 0;
  }
  window_fill_ = 0;
}

void AdaptiveMetropolis::reset_counts() {
  accepts_.assign(active_.size(), 0);
  proposals_.assign(active_.size(), 0);
}

double AdaptiveMetropolis::scale(std::size_t slot) const { return std::exp(log_scale_.at(slot)); }

std::vector<double> AdaptiveMetropolis::acceptance() const {
  std::vector<double> out(active_.size(), 0.0);
  for (std::size_t s = 0; s < active_.size(); ++s)
    out[s] = proposals_[s] ? static_cast<double>(accepts_[s]) / static_cast<double>(proposals_[s]) : 0.0;
  return out;
}

}  // namespace hecon
