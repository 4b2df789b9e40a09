#include "helpers.hpp"

#include "assessment.hpp"
#include "../oracles/oracles.hpp"

using namespace hecon;

namespace {

oracle::Model as_oracle(const HurdleParams& p) {
  oracle::Model m;
  m.J = p.J;
  m.gamma_costs = p.family == CostFamily::Gamma;
  m.floor = p.cost_floor;
  const ParamLayout layout(p.J);
  for (std::size_t i = 0; i < layout.size(); ++i) m.p[layout[i].name] = p.values[i];
  return m;
}

GroupSubject from_traj(const Trajectory& t) {
  GroupSubject s;
  s.id = "t";
  for (int j = 0; j <= t.J(); ++j) {
    s.u.push_back(t.u[j]);
    s.c.push_back(t.c[j]);
  }
  return s;
}

}  // namespace

TEST_CASE("block names follow the factorisation") {
  const auto b = block_names(2);
  REQUIRE(b.size() == 6);
  CHECK(b[0] == "c_0");
  CHECK(b[1] == "u_0|c_0");
  CHECK(b[2] == "c_1|c_0,u_0");
  CHECK(b[5] == "u_2|u_1,c_2");
}

TEST_CASE("observed-data likelihood is exact for complete subjects and for a missing leaf") {
  const HurdleParams p = testing::default_truth().arms[0];
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Trajectory t = simulate_trajectory(p, rng);
    GroupSubject s = from_traj(t);
    const ObservedLoglik full = observed_data_loglik(p, s, 10, rng);
    CHECK(full.total == doctest::Approx(loglik_subject(p, t)).epsilon(1e-12));
    CHECK(std::accumulate(full.block.begin(), full.block.end(), 0.0) == doctest::Approx(full.total).epsilon(1e-12));
    // u_2 is the last variable in the chain: integrating it out leaves the prefix.
    s.u[2].reset();
    ResponseMask mask = ResponseMask::all(2);
    mask.utility[2] = false;
    const ObservedLoglik leaf = observed_data_loglik(p, s, 64, rng);
    CHECK(leaf.total == doctest::Approx(loglik_subject(p, t, &mask)).epsilon(1e-10));
    CHECK(std::abs(leaf.block[5]) < 1e-10);
  }
}

TEST_CASE("discrete coarsening: enumeration agrees with the Monte Carlo estimator") {
  HurdleParams p = HurdleParams::zeros(1, CostFamily::LogNormal, 20.0);
  p.set("nu_c_0", 6.0);
  p.set("tau_c_0", 0.8);
  p.set("pi_c_0", 0.2);
  p.set("alpha_0_0", 0.3);
  p.set("alpha_1_0", 0.05);
  p.set("sigma_u_0", 1e-8);
  p.set("gamma_0_0", -0.5);
  p.set("gamma_1_0", 0.1);
  p.set("beta_0_1", 2.0);
  p.set("beta_1_1", 0.6);
  p.set("beta_2_1", 0.9);
  p.set("tau_c_1", 0.5);
  p.set("zeta_0_1", -1.0);
  p.set("zeta_1_1", 0.05);
  p.set("zeta_2_1", 0.7);
  p.set("alpha_0_1", 0.2);
  p.set("alpha_1_1", -0.02);
  p.set("alpha_2_1", 1.2);
  p.set("sigma_u_1", 0.1);
  p.set("gamma_0_1", -1.2);
  p.set("gamma_1_1", 0.02);
  p.set("gamma_2_1", 1.1);
  GroupSubject s{"x", {std::nullopt, 0.83}, {300.0, 700.0}};
  Rng rng(3);
  const double est = observed_data_loglik(p, s, 20000, rng).total;
  const double ref = oracle::enumerate_observed(as_oracle(p), {{300.0, 700.0}, {0.0, 0.83}}, {false, false}, {true, false});
  CHECK(std::abs(est - ref) < 1e-6);
}

TEST_CASE("Spearman correlation and PPC p-values") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ties take average ranks: x ranks (1.5,1.5,3,4), y ranks (1,2,3,4).
  const double r = spearman({5, 5, 6, 7}, {1, 2, 3, 4});
  CHECK(r == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
  CHECK(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
  CHECK(std::isnan(spearman({1, 2}, {1, 2})));
  CHECK(ppc_p_value({0.1, 0.2, 0.3, 0.4}, 0.25) == doctest::Approx(1.0));
  CHECK(ppc_p_value({0.1, 0.2, 0.3, 0.4}, 0.05) == 0.0);
  CHECK(ppc_p_value({0.1, 0.2, 0.3, std::nan("")}, 0.1) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("thinning indices") {
  CHECK(thin_indices(10, 0).size() == 10);
  CHECK(thin_indices(10, 20).size() == 10);
  const auto t = thin_indices(1000, 4);
  CHECK(t == std::vector<std::size_t>{0, 250, 500, 750});
}

TEST_CASE("DIC on a small fit: penalties positive, blocks add to the total") {
  TruthSpec spec = testing::default_truth(80);
  const SyntheticTrial trial = generate_trial(spec);
  const RescaledDataset r = rescale_utilities(trial.observed);
  const GroupData g = make_group(r, 1, GroupKind::All, 50.0);
  ChainConfig c;
  c.n_iter = 800;
  c.burn_in = 300;
  c.seed = 9;
  const PosteriorDraws d = fit_group(g, CostFamily::LogNormal, c);
  DicSettings s;
  s.M_bar = 20;
  s.M_hat = 200;
  s.max_draws = 30;
  const DicReport rep = dic(d, g, s);
  CHECK(rep.n_draws == 30);
  REQUIRE(rep.blocks.size() == 6);
  double sum = 0.0;
  for (const auto& b : rep.blocks) sum += b.dic;
  CHECK(sum == doctest::Approx(rep.total.dic).epsilon(1e-9));
  CHECK(rep.total.p_d > 10.0);
  CHECK(rep.total.p_d < 80.0);
  CHECK(rep.total.dic == doctest::Approx(rep.total.d_bar + rep.total.p_d));
  const HurdleParams pm = posterior_mean_params(d);
  CHECK(pm.get("tau_c_1") > 0.0);
}
