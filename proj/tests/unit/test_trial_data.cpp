#include "helpers.hpp"

#include <random>

#include "trial_data.hpp"

using namespace hecon;

namespace {

const char* kSmall =
    "id,arm,u0,u1,u2,c0,c1,c2\n"
    "a,1,0.5,0.7,1,100,0,250\n"
    "b,1,0.4,NA,0.8,50,20,NA\n"
    "c,2,1,1,1,0,0,0\n"
    "d,2,-0.2,0.3,NA,75,80,90\n";

}  // namespace

TEST_CASE("csv ingestion keeps values and missing markers") {
  const TrialDataset d = parse_trial_csv_text(kSmall, 2);
  REQUIRE(d.subjects.size() == 4);
  CHECK(d.arm_size(1) == 2);
  CHECK(d.subjects[1].id == "b");
  CHECK_FALSE(d.subjects[1].utility_observed(1));
  CHECK_FALSE(d.subjects[1].cost_observed(2));
  CHECK(*d.subjects[3].utilities[0] == doctest::Approx(-0.2));
  CHECK(d.subjects[0].completer());
  CHECK_FALSE(d.subjects[3].completer());
  CHECK(d.time_unit_fractions == std::vector<double>{0.5, 0.5});
}

TEST_CASE("csv ingestion rejects malformed input with typed errors") {
  CHECK_CODE(parse_trial_csv_text("id,arm,u0,u1,u2,c0,c1\nx,1,1,1,1,1,1\n", 2), ErrorCode::Schema);
  CHECK_CODE(parse_trial_csv_text("id,arm,u0,u1,u2,c0,c1,c2\nx,1,1,1,1,1,1\n", 2), ErrorCode::Parse);
  CHECK_CODE(parse_trial_csv_text("id,arm,u0,u1,u2,c0,c1,c2\nx,1,abc,1,1,1,1,1\n", 2), ErrorCode::Parse);
  CHECK_CODE(parse_trial_csv_text("id,arm,u0,u1,u2,c0,c1,c2\nx,1,1.2,1,1,1,1,1\ny,2,1,1,1,1,1,1\n", 2).validate(),
             ErrorCode::Validation);
  CHECK_CODE(parse_trial_csv_text("id,arm,u0,u1,u2,c0,c1,c2\nx,1,1,1,1,-5,1,1\ny,2,1,1,1,1,1,1\n", 2).validate(),
             ErrorCode::Validation);
  CHECK_CODE(load_trial_csv("/nonexistent/trial.csv", 2), ErrorCode::Io);
}

TEST_CASE("custom schema and time fractions") {
  ParseOptions opt;
  opt.schema.id_column = "pid";
  opt.schema.arm_column = "group";
  opt.schema.utility_columns = {"eq0", "eq1"};
  opt.schema.cost_columns = {"k0", "k1"};
  opt.schema.missing = ".";
  opt.time_unit_fractions = {0.25};
  const TrialDataset d = parse_trial_csv_text("pid,group,eq0,eq1,k0,k1\np1,1,0.5,.,10,20\np2,2,0.6,0.7,.,5\n", 1, opt);
  CHECK(d.J == 1);
  CHECK_FALSE(d.subjects[0].utility_observed(1));
  CHECK_FALSE(d.subjects[1].cost_observed(0));
  CHECK(d.time_unit_fractions == std::vector<double>{0.25});
}

TEST_CASE("json and csv round trips preserve the dataset") {
  const TrialDataset d = parse_trial_csv_text(kSmall, 2);
  const TrialDataset back = trial_from_json(trial_to_json(d));
  REQUIRE(back.subjects.size() == d.subjects.size());
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    CHECK(back.subjects[i].utilities == d.subjects[i].utilities);
    CHECK(back.subjects[i].costs == d.subjects[i].costs);
  }
  std::ostringstream os;
  write_trial_csv(os, d);
  const TrialDataset again = parse_trial_csv_text(os.str(), 2);
  for (std::size_t i = 0; i < d.subjects.size(); ++i) CHECK(again.subjects[i].costs == d.subjects[i].costs);
}

TEST_CASE("patterns: completers lead, counts add up, signatures descend") {
  const TrialDataset d = parse_trial_csv_text(kSmall, 2);
  const PatternTable t = classify_patterns(d);
  const ArmPatterns& a1 = t.arm(1);
  REQUIRE(a1.R() == 2);
  CHECK(a1.patterns[0].completer);
  CHECK(a1.completer_entry() == &a1.patterns[0]);
  CHECK(signature_string(a1.patterns[1].signature) == "1,1;0,1;1,0");
  std::size_t n = 0;
  for (const auto& p : a1.patterns) n += p.count;
  CHECK(n == a1.n_subjects);
  CHECK(t.arm(2).patterns[0].signature > t.arm(2).patterns[1].signature);
  CHECK_FALSE(t.arm(2).patterns[1].mean_u[2].has_value());
}

TEST_CASE("rescaling inverts to 1e-12 on random data in both modes") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(kEq5dFloor, 1.0);
  TrialDataset d;
  d.J = 2;
  for (int i = 0; i < 200; ++i) {
    SubjectRecord s;
    s.id = "s" + std::to_string(i);
    s.arm = 1 + i % 2;
    for (int j = 0; j <= 2; ++j) {
      s.utilities.push_back(i % 7 == j ? std::optional<double>{} : std::optional<double>{i % 5 == 0 ? 1.0 : U(rng)});
      s.costs.push_back(100.0 * j + i);
    }
    d.subjects.push_back(s);
  }
  for (RescaleMode mode : {RescaleMode::TheoreticalBounds, RescaleMode::ObservedMinMax}) {
    const RescaledDataset r = rescale_utilities(d, mode);
    const TrialDataset back = invert_rescaling(r);
    for (std::size_t i = 0; i < d.subjects.size(); ++i)
      for (int j = 0; j <= 2; ++j) {
        const auto& u0 = d.subjects[i].utilities[j];
        const auto& u1 = back.subjects[i].utilities[j];
        REQUIRE(u0.has_value() == u1.has_value());
        if (!u0) continue;
        CHECK(std::abs(*u0 - *u1) <= 1e-12);
        const double star = *r.base.subjects[i].utilities[j];
        CHECK(star >= 0.0);
        CHECK(star <= 1.0);
        if (*u0 == 1.0) CHECK(star == 1.0);
      }
  }
}

TEST_CASE("observed min-max mode flags a lost structural one") {
  TrialDataset d = parse_trial_csv_text(
      "id,arm,u0,u1,u2,c0,c1,c2\na,1,0.2,0.5,0.9,1,1,1\nb,2,0.4,0.7,0.8,1,1,1\n", 2);
  const RescaledDataset r = rescale_utilities(d, RescaleMode::ObservedMinMax);
  CHECK_FALSE(r.structural_one_preserved[0]);
  CHECK(*r.base.subjects[1].utilities[0] == 1.0);
  const RescaledDataset t = rescale_utilities(d);
  CHECK(t.structural_one_preserved[0]);
  CHECK(t.to_original(1, t.to_model(1, 0.3)) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("completion split and cost floor") {
  const TrialDataset d = parse_trial_csv_text(kSmall, 2);
  const CompletionSplit s = split_by_completion(d);
  CHECK(s.completers.subjects.size() == 2);
  CHECK(s.noncompleters.subjects.size() == 2);
  CHECK(default_cost_floor(d) == doctest::Approx(10.0));
}
