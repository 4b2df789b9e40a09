#include "helpers.hpp"

#include <random>

#include "econ.hpp"
#include "extrapolation.hpp"

using namespace hecon;

namespace {

TimeMeans random_means(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.2, 0.9), C(100.0, 3000.0);
  TimeMeans m;
  for (std::size_t d = 0; d < n; ++d) {
    m.u.push_back({U(rng), U(rng), U(rng)});
    m.c.push_back({C(rng), C(rng), C(rng)});
  }
  return m;
}

}  // namespace

TEST_CASE("scenario names round trip and degenerate sign contract") {
  for (auto k : {ScenarioKind::CompleteCase, ScenarioKind::Mar, ScenarioKind::BenchmarkZero, ScenarioKind::Flat,
                 ScenarioKind::Skew0, ScenarioKind::Skew1, ScenarioKind::Degenerate, ScenarioKind::CrossSectional})
    CHECK(scenario_kind_from_string(to_string(k)) == k);
  CHECK(scenario_kind_from_string("benchmark_zero") == ScenarioKind::BenchmarkZero);
  CHECK_CODE(scenario_kind_from_string("mnar"), ErrorCode::Config);
  CHECK_FALSE(uses_restriction(ScenarioKind::Mar));
  CHECK(uses_restriction(ScenarioKind::BenchmarkZero));
  CHECK_FALSE(needs_noncompleters(ScenarioKind::CrossSectional));
  SensitivityScenario s{ScenarioKind::Degenerate, "", {0, -0.1, -0.1}, {0, 10, 10}};
  CHECK_NOTHROW(s.validate(2));
  s.delta_u[1] = 0.1;
  CHECK_CODE(s.validate(2), ErrorCode::Config);
  s.delta_u[1] = -0.1;
  s.delta_c[2] = -1;
  CHECK_CODE(s.validate(2), ErrorCode::Config);
  s.delta_c = {0, 1};
  CHECK_CODE(s.validate(2), ErrorCode::Config);
}

TEST_CASE("random Delta families: support and sign") {
  Rng rng(1);
  for (auto k : {ScenarioKind::Flat, ScenarioKind::Skew0, ScenarioKind::Skew1})
    for (int i = 0; i < 10000; ++i) {
      const DeltaDraw d = sample_delta(k, 0.3, 50.0, rng);
      CHECK(d.u <= 0.0);
      CHECK(d.u >= -0.6);
      CHECK(d.c >= 0.0);
      CHECK(d.c <= 100.0);
    }
  const DeltaDraw z = sample_delta(ScenarioKind::BenchmarkZero, 0.3, 50.0, rng);
  CHECK(z.u == 0.0);
  CHECK(z.c == 0.0);
  CHECK_CODE(sample_delta(ScenarioKind::Flat, -1.0, 1.0, rng), ErrorCode::InvalidArgument);
}

TEST_CASE("restriction shifts only the missing share and mixing is a convex combination") {
  const TimeMeans m = random_means(50, 3);
  ObservedShare w{{1.0, 0.6, 0.3}, {1.0, 0.8, 0.5}, {}};
  Calibration cal{{0.1, 0.1, 0.1}, {100, 100, 100}, {}};
  SensitivityScenario deg{ScenarioKind::Degenerate, "", {0, -0.05, -0.02}, {0, 40, 80}};
  const TimeMeans r = restricted_group_means(m, w, deg, cal, 1, 1);
  for (std::size_t d = 0; d < m.n_draws(); ++d) {
    CHECK(r.u[d][0] == m.u[d][0]);
    CHECK(r.c[d][2] == m.c[d][2] + 0.5 * 80);
  }
  const TimeMeans flat = restricted_group_means(m, w, {ScenarioKind::Flat}, cal, 1, 2);
  for (std::size_t d = 0; d < m.n_draws(); ++d) {
    CHECK(flat.c[d][1] >= m.c[d][1]);
    CHECK(flat.c[d][1] <= m.c[d][1] + 0.2 * 200.0);
  }
  const TimeMeans comp = random_means(50, 4);
  const std::vector<double> psi(50, 0.25);
  const TimeMeans mix = mix_means(psi, comp, m);
  CHECK(mix.c[7][1] == doctest::Approx(0.25 * comp.c[7][1] + 0.75 * m.c[7][1]));
  CHECK_CODE(mix_means(std::vector<double>(3, 0.5), comp, m), ErrorCode::Shape);
  TimeMeans orig = m;
  orig.scale = UtilityScale::Original;
  CHECK_CODE(mix_means(psi, comp, orig), ErrorCode::Unit);
  CHECK_CODE(restricted_group_means(orig, w, deg, cal, 1, 1), ErrorCode::Unit);
}

TEST_CASE("calibration and observed shares come from observed non-completers") {
  const TrialDataset d = parse_trial_csv_text(
      "id,arm,u0,u1,u2,c0,c1,c2\n"
      "a,1,0.5,0.7,1,100,0,250\n"
      "b,1,0.4,NA,0.8,50,20,NA\n"
      "c,1,0.3,0.2,NA,70,40,NA\n"
      "d,2,-0.2,0.3,0.1,75,80,90\n",
      2);
  const RescaledDataset r = rescale_utilities(d);
  const ObservedShare w = observed_shares(r, 1);
  CHECK(w.w_u == std::vector<double>{1.0, 0.5, 0.5});
  CHECK(w.w_c == std::vector<double>{1.0, 1.0, 0.0});
  CHECK_FALSE(w.warnings.empty());
  const Calibration cal = calibration_sds(r, 1);
  CHECK(cal.sd_c[1] == doctest::Approx(std::sqrt(200.0)));
  CHECK(cal.sd_u[0] == doctest::Approx(std::sqrt(0.005) / 1.594));
  CHECK(cal.sd_c[2] == 0.0);
}

TEST_CASE("QALY and total-cost aggregation") {
  CHECK(qaly({0.6, 0.8, 1.0}, {0.5, 0.5}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(total_cost({100, 200, 300}) == 500.0);
  CHECK(total_cost({100, 200, 300}, true) == 600.0);
  CHECK_CODE(qaly({0.6, 0.8}, {0.5, 0.5}), ErrorCode::Shape);
  TimeMeans m = random_means(3, 1);
  CHECK_CODE(aggregate_qaly_cost(m, {0.5, 0.5}), ErrorCode::Unit);
  m.scale = UtilityScale::Original;
  const ArmEcon e = aggregate_qaly_cost(m, {0.5, 0.5});
  CHECK(e.mu_c[2] == m.c[2][1] + m.c[2][2]);
}

TEST_CASE("k grid, ICER and CEAC boundary conventions") {
  const auto ks = k_grid(40000, 100);
  CHECK(ks.size() == 401);
  CHECK(ks.back() == 40000.0);
  CHECK_CODE(k_grid(100, 0), ErrorCode::Config);
  CHECK(icer({0.1, 0.3}, {100, 300}) == doctest::Approx(1000.0));
  CHECK_CODE(icer({0.1, -0.1}, {1, 1}), ErrorCode::Numeric);
  // At k = 1000 the net benefit is exactly 0 for every draw: nothing counts.
  const auto c = ceac({0.1, 0.2}, {100, 200}, {999, 1000, 1001});
  CHECK(c[0].probability == 0.0);
  CHECK(c[1].probability == 0.0);
  CHECK(c[2].probability == 1.0);
  const auto cep = cep_export({0.1, -0.1}, {-5, 5}, 100);
  CHECK(cep[0].in_area);
  CHECK_FALSE(cep[1].in_area);
}

TEST_CASE("econ summary differences") {
  ArmEcon a{{0.5, 0.6}, {1000, 1100}}, b{{0.55, 0.62}, {1200, 1150}};
  const EconSummary s = summarize_econ(a, b, {0, 3000});
  CHECK(s.delta_e[0] == doctest::Approx(0.05));
  CHECK(s.delta_c[1] == doctest::Approx(50.0));
  CHECK(s.icer == doctest::Approx(125.0 / 0.035));
  CHECK(s.ceac[1].probability == 0.5);
}

TEST_CASE("cross-sectional comparator: adjusted arm means track the sample means") {
  TruthSpec spec = testing::default_truth(300);
  spec.missingness.rate = 0.0;
  const SyntheticTrial t = generate_trial(spec);
  const ComparatorResult r = cross_sectional_comparator(t.observed, 2000, 5);
  REQUIRE(r.arms[0].mu_e.size() == 2000);
  double e1 = 0, e2 = 0;
  for (const auto& s : t.observed.subjects) {
    std::vector<double> u;
    for (auto& v : s.utilities) u.push_back(*v);
    (s.arm == 1 ? e1 : e2) += qaly(u, spec.time_unit_fractions) / 300.0;
  }
  auto avg = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  const double diff = avg(r.arms[1].mu_e) - avg(r.arms[0].mu_e);
  CHECK(diff == doctest::Approx(e2 - e1).epsilon(0.3));
  TrialDataset tiny = t.observed;
  tiny.subjects.resize(4);
  CHECK_CODE(cross_sectional_comparator(tiny, 10, 1), ErrorCode::Validation);
}
