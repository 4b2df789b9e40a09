#include "helpers.hpp"

#include <filesystem>

#include <json.hpp>

#include "pipeline.hpp"
#include "synthetic.hpp"

using namespace hecon;
namespace fs = std::filesystem;

TEST_CASE("truth spec parsing reports every missing parameter") {
  CHECK_CODE(truth_from_json("{\"arms\":{\"1\":{\"nu_c_0\":1},\"2\":{}}}"), ErrorCode::Schema);
  try {
    truth_from_json("{\"arms\":{\"1\":{\"nu_c_0\":1},\"2\":{}}}");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("tau_c_0") != std::string::npos);
    CHECK(std::string(e.what()).find("gamma_2_2") != std::string::npos);
  }
  const TruthSpec s = testing::default_truth();
  const TruthSpec back = truth_from_json(truth_to_json(s));
  CHECK(back.arms[1].values == s.arms[1].values);
  CHECK(back.missingness.rate == s.missingness.rate);
}

TEST_CASE("generator: baseline cost always observed, structural one kept, reproducible") {
  TruthSpec s = testing::default_truth(300);
  s.missingness.type = Missingness::Type::MNAR;
  s.missingness.intercept = -6.0;
  s.missingness.log_c_coef = 0.7;
  const SyntheticTrial a = generate_trial(s), b = generate_trial(s);
  REQUIRE(a.observed.subjects.size() == 600);
  std::size_t ones = 0, missing = 0;
  for (std::size_t i = 0; i < a.observed.subjects.size(); ++i) {
    const auto& o = a.observed.subjects[i];
    const auto& f = a.full.subjects[i];
    CHECK(o.cost_observed(0));
    for (int j = 0; j <= 2; ++j) {
      ones += *f.utilities[j] == 1.0;
      missing += !o.cost_observed(j) + !o.utility_observed(j);
      if (o.cost_observed(j)) CHECK(*o.costs[j] == *f.costs[j]);
    }
    CHECK(o.utilities == b.observed.subjects[i].utilities);
  }
  CHECK(ones > 0);
  CHECK(missing > 0);
  CHECK_NOTHROW(a.observed.validate());
  s.missingness.joint = true;
  for (const auto& o : generate_trial(s).observed.subjects)
    for (int j = 1; j <= 2; ++j) CHECK(o.cost_observed(j) == o.utility_observed(j));
}

TEST_CASE("MNAR by cost hides larger costs") {
  TruthSpec s = testing::default_truth(3000);
  s.missingness.type = Missingness::Type::MNAR;
  s.missingness.intercept = -8.0;
  s.missingness.log_c_coef = 1.0;
  const SyntheticTrial t = generate_trial(s);
  double so = 0, sm = 0;
  int no = 0, nm = 0;
  for (std::size_t i = 0; i < t.full.subjects.size(); ++i) {
    const double c = *t.full.subjects[i].costs[2];
    if (t.observed.subjects[i].cost_observed(2)) {
      so += c;
      ++no;
    } else {
      sm += c;
      ++nm;
    }
  }
  REQUIRE(nm > 50);
  CHECK(sm / nm > 1.3 * so / no);
}

TEST_CASE("true means: analytic baseline, QALY from the per-time means") {
  const TruthSpec s = testing::default_truth(10, 50000);
  const TrueMeans t = true_means(s);
  const HurdleParams& p = s.arms[0];
  CHECK(t.mu_c[0][0] == doctest::Approx((1 - p.get("pi_c_0")) * std::exp(p.get("nu_c_0") + 0.5 * 0.64)));
  CHECK(t.mu_e[0] == doctest::Approx(0.5 * (t.mu_u[0][0] + 2 * t.mu_u[0][1] + t.mu_u[0][2]) * 0.5));
  CHECK(t.mu_c_total[1] == doctest::Approx(t.mu_c[1][1] + t.mu_c[1][2]));
}

TEST_CASE("recovery rows") {
  std::vector<double> d(1000);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = i / 1000.0;
  const RecoveryRow r = recover_target("x", 0.5, d);
  CHECK(r.covered);
  CHECK(r.bias == doctest::Approx(-0.0005));
  CHECK_FALSE(recover_target("x", 0.99, d).covered);
}

TEST_CASE("run configuration parsing") {
  const RunConfig c = parse_run_config(
      R"({"truth":"t.json","families":["gamma"],"chain":{"n_iter":100,"burn_in":10},"scenarios":["mar",{"degenerate":{"u":[0,-0.1,-0.1],"c":[0,1,1]},"name":"d1"}]})",
      "/base", R"({"seed":5})");
  CHECK(c.seed == 5);
  CHECK(c.truth_path.value() == "t.json");
  CHECK(c.resolve("t.json") == "/base/t.json");
  CHECK(c.families == std::vector<CostFamily>{CostFamily::Gamma});
  CHECK(c.scenarios.at(1).label() == "d1");
  CHECK(c.chain.n_iter == 100);
  CHECK_CODE(parse_run_config("{", "."), ErrorCode::Parse);
  CHECK_CODE(parse_run_config(R"({"scenarios":["nope"]})", "."), ErrorCode::Config);
  CHECK_CODE(parse_run_config(R"({"scenarios":["mar","mar"]})", "."), ErrorCode::Config);
  CHECK_CODE(parse_run_config(R"({"scenarios":[{"degenerate":{"u":[0,0.1,0],"c":[0,0,0]}}]})", "."), ErrorCode::Config);
  CHECK_CODE(load_run_config("/nonexistent/config.json"), ErrorCode::Io);
}

TEST_CASE("draws CSV round trip") {
  PosteriorDraws d;
  d.J = 1;
  d.names = ParamLayout(1).names();
  d.chains = {DrawMatrix(4, d.names.size()), DrawMatrix(4, d.names.size())};
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t k = 0; k < d.names.size(); ++k) d.chains[c].at(r, k) = 0.1 + 1e-7 * (c * 1000 + r * 100 + k) / 3.0;
  ChainConfig cfg;
  cfg.n_iter = 8;
  cfg.burn_in = 4;
  const std::string text = draws_to_csv(d, "# scenario=fit seed=1\n", cfg);
  const PosteriorDraws back = draws_from_csv(text, 1, CostFamily::LogNormal, 1.0);
  REQUIRE(back.n_chains() == 2);
  CHECK(back.chains[1].data == d.chains[1].data);
}

TEST_CASE("pipeline end to end on a tiny run; every CSV carries a run header") {
  const fs::path out = fs::temp_directory_path() / "hecon_unit_pipeline";
  fs::remove_all(out);
  nlohmann::json truth = nlohmann::json::parse(testing::slurp(testing::config_path("truth_mcar.json")));
  truth["n_per_arm"] = 60;
  truth["truth_sims"] = 2000;
  const nlohmann::json cfg = {{"truth", truth},
                              {"chain", {{"n_chains", 2}, {"n_iter", 200}, {"burn_in", 50}}},
                              {"families", {"lognormal", "gamma"}},
                              {"scenarios", {"cc", "mar", "delta0", "flat", "cs"}},
                              {"n_sims", 50},
                              {"eval_draws", 40},
                              {"assess", {{"M_bar", 10}, {"M_hat", 40}, {"dic_draws", 10}, {"ppc_replicates", 20}}},
                              {"out", out.string()},
                              {"seed", 3}};
  const RunConfig rc = parse_run_config(cfg.dump(), ".");
  CHECK_CODE(cmd_evaluate(rc), ErrorCode::Dependency);
  for (const char* cmd : {"simulate", "fit", "evaluate", "assess"}) {
    const CommandReport r = run_command(cmd, rc);
    CHECK(r.command == cmd);
    for (const auto& f : r.files) CHECK(fs::exists(out / f));
  }
  std::size_t csvs = 0;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.path().extension() != ".csv") continue;
    ++csvs;
    const std::string text = testing::slurp(e.path().string());
    CHECK_MESSAGE(text.rfind("# scenario=", 0) == 0, e.path().string());
  }
  CHECK(csvs > 10);
  const auto dic = nlohmann::json::parse(testing::slurp((out / "assess" / "dic.json").string()));
  CHECK(dic.contains("lower_total_dic"));
  CHECK_CODE(run_command("frobnicate", rc), ErrorCode::InvalidArgument);
  fs::remove_all(out);
}
