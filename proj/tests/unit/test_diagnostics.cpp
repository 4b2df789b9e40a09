#include "helpers.hpp"

#include <algorithm>
#include <random>

#include "diagnostics.hpp"

using namespace hecon;

namespace {

std::vector<double> ar1(double rho, std::size_t n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::vector<double> x(n);
  double v = N(rng) / std::sqrt(1 - rho * rho);
  for (auto& e : x) {
    v = rho * v + N(rng);
    e = v + shift;
  }
  return x;
}

}  // namespace

TEST_CASE("R-hat edge cases") {
  const std::vector<double> c(50, 2.0);
  CHECK(rhat({c, c}) == 1.0);
  std::vector<double> d(50, 3.0);
  CHECK(std::isinf(rhat({c, d})));
  CHECK_CODE(rhat({c}), ErrorCode::InvalidArgument);
  CHECK_CODE(rhat({std::vector<double>(5, 1.0), std::vector<double>(5, 1.0)}), ErrorCode::InvalidArgument);
}

TEST_CASE("R-hat near 1 for mixed chains and large for separated ones") {
  const auto a = ar1(0.5, 4000, 1), b = ar1(0.5, 4000, 2);
  CHECK(rhat({a, b}) < 1.01);
  const auto c = ar1(0.5, 4000, 3, 3.0);
  CHECK(rhat({a, c}) > 1.5);
  // A trend inside one chain is caught by the split.
  std::vector<double> drift = a;
  for (std::size_t i = 0; i < drift.size(); ++i) drift[i] += 4.0 * i / drift.size();
  CHECK(rhat({drift, b}) > 1.1);
}

TEST_CASE("ESS of AR(1) chains is near n(1-rho)/(1+rho)") {
  for (double rho : {0.0, 0.5, 0.9}) {
    const auto a = ar1(rho, 20000, 10), b = ar1(rho, 20000, 11);
    const double expect = 40000 * (1 - rho) / (1 + rho);
    CHECK(ess({a, b}) == doctest::Approx(expect).epsilon(0.15));
  }
  const std::vector<double> c(100, 1.0);
  CHECK(ess({c, c}) == 1.0);
  std::vector<double> alt(1000);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = i % 2 ? 1.0 : -1.0;
  CHECK(ess({alt, alt}) <= 2000.0);
}

TEST_CASE("intervals and quantiles") {
  std::vector<double> x(101);
  for (int i = 0; i <= 100; ++i) x[i] = i;
  CHECK(quantile(x, 0.5) == 50.0);
  CHECK(quantile(x, 0.025) == doctest::Approx(2.5));
  const Interval ci = central_interval(x, 0.9);
  CHECK(ci.lo == doctest::Approx(5.0));
  CHECK(ci.hi == doctest::Approx(95.0));
  // Right-skewed draws: the HPD interval is shorter than the central one and sits lower.
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> E(1.0);
  std::vector<double> e(20000);
  for (auto& v : e) v = E(rng);
  const Interval h = hpd(e), c = central_interval(e);
  CHECK(h.hi - h.lo < c.hi - c.lo);
  CHECK(h.lo < c.lo);
  CHECK(h.lo == doctest::Approx(0.0).epsilon(0.01).scale(1.0));
  CHECK(h.hi == doctest::Approx(-std::log(0.05)).epsilon(0.05));
  const double inside = std::count_if(e.begin(), e.end(), [&](double v) { return v >= h.lo && v <= h.hi; });
  CHECK(inside / e.size() >= 0.95);
}

TEST_CASE("summaries skip pinned parameters in max R-hat") {
  PosteriorDraws d;
  d.J = 1;
  d.names = ParamLayout(1).names();
  const auto a = ar1(0.3, 500, 1), b = ar1(0.3, 500, 2);
  d.chains = {DrawMatrix(500, d.names.size()), DrawMatrix(500, d.names.size())};
  for (std::size_t r = 0; r < 500; ++r)
    for (std::size_t k = 0; k < d.names.size(); ++k) {
      d.chains[0].at(r, k) = k == 1 ? 1.0 : a[r];
      d.chains[1].at(r, k) = k == 1 ? 5.0 : b[r];
    }
  d.acceptance = {std::vector<double>(d.names.size(), 0.4), std::vector<double>(d.names.size(), 0.5)};
  auto s = summarize(d);
  CHECK(std::isinf(max_rhat(s)));
  d.pinned = {d.names[1]};
  s = summarize(d);
  CHECK(s[1].pinned);
  CHECK(max_rhat(s) < 1.05);
  CHECK(s[0].acceptance == doctest::Approx(0.45));
}
