#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hecon {

using Rng = std::mt19937_64;

/// Named stream tags so that independent consumers never share a seed sequence.
enum class Stream : std::uint64_t {
  Chain = 1,
  MarginalMeans = 2,
  PatternProbs = 3,
  Delta = 4,
  Dic = 5,
  Replicate = 6,
  Synthetic = 7,
  Comparator = 8,
  Truth = 9,
};

/// Deterministic generator for (seed, tag, indices...). Distinct index tuples give
/// statistically independent streams through std::seed_seq mixing.
inline Rng make_rng(std::uint64_t seed, Stream tag, std::initializer_list<std::uint64_t> idx = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(4 + 2 * idx.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  push(static_cast<std::uint64_t>(tag));
  for (auto v : idx) push(v);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double std_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

inline double gamma_draw(Rng& rng, double shape, double scale = 1.0) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

inline double beta_draw(Rng& rng, double a, double b) {
  const double x = gamma_draw(rng, a);
  const double y = gamma_draw(rng, b);
  return x / (x + y);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

}  // namespace hecon
