#pragma once

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "error.hpp"
#include "synthetic.hpp"

#define CHECK_CODE(expr, expected)                              \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const hecon::Error& e_) {                          \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.code() == (expected), e_.what());        \
    }                                                           \
    CHECK_MESSAGE(thrown_, "expected an hecon::Error: " #expr); \
  } while (0)

namespace testing {

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE_MESSAGE(in.good(), path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string config_path(const std::string& name) { return std::string(HECON_SOURCE_DIR) + "/tools/configs/" + name; }

/// The shipped MCAR truth with a modest size, used wherever a realistic parameter set helps.
inline hecon::TruthSpec default_truth(std::size_t n_per_arm = 200, int truth_sims = 20000) {
  hecon::TruthSpec s = hecon::truth_from_json(slurp(config_path("truth_mcar.json")));
  s.n_per_arm = n_per_arm;
  s.truth_sims = truth_sims;
  return s;
}

}  // namespace testing
