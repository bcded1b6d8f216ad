#include <random>

#include <gtest/gtest.h>

#include "coalition/election_model.hpp"
#include "oracles.hpp"

using namespace coalition;

namespace {

const char* kFfm = R"({
  "major": {"name": "FfM", "support": 13.5, "mu": 0, "sigma": 1},
  "minor": {"name": "JfA", "support": 1.0, "mu": 0, "sigma": 1},
  "rules": {"threshold": 3, "seats": 81},
  "mandate_value": 1.15
})";

ElectionRules rules(double threshold, int seats) {
  ElectionRules r;
  r.threshold = threshold;
  r.seats = seats;
  return r;
}

std::vector<int> seats_of(const std::vector<double>& v, double threshold, int seats) {
  return dhondt_allocate(std::span<const double>(v), rules(threshold, seats)).seats;
}

}  // namespace

TEST(LoadScenario, DerivesExpectedSupportShortfallAndStrike) {
  const auto sc = load_scenario(kFfm);
  EXPECT_EQ(sc.expected_support, 14.5);
  EXPECT_EQ(sc.votes_needed, 0.15);
  EXPECT_EQ(sc.strike, 14.65);
  EXPECT_EQ(sc.strike, sc.expected_support + sc.votes_needed);
}

TEST(LoadScenario, StrikeOverrideReplacesDerivedStrike) {
  auto doc = nlohmann::json::parse(kFfm);
  doc["strike_override"] = 15.65;
  const auto sc = scenario_from_json(doc);
  EXPECT_EQ(sc.strike, 15.65);
  EXPECT_EQ(sc.votes_needed, 0.15);
}

TEST(LoadScenario, DpsScenarioStrikeIsExactDecimal) {
  auto doc = nlohmann::json::parse(kFfm);
  doc["major"]["support"] = 24.1;
  doc["minor"]["support"] = 2.2;
  const auto sc = scenario_from_json(doc);
  EXPECT_EQ(sc.votes_needed, 0.1);
  EXPECT_EQ(sc.strike, 26.4);
}

TEST(LoadScenario, RejectsMajorAtThreshold) {
  auto doc = nlohmann::json::parse(kFfm);
  doc["major"]["support"] = 3.0;
  try {
    scenario_from_json(doc);
    FAIL() << "expected rejection";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "major.support");
  }
}

TEST(LoadScenario, RejectsMinorAtOrAboveThreshold) {
  auto doc = nlohmann::json::parse(kFfm);
  doc["minor"]["support"] = 3.0;
  EXPECT_THROW(scenario_from_json(doc), ConfigError);
}

TEST(LoadScenario, SchemaViolationsNameTheField) {
  auto expect_field = [](nlohmann::json doc, const std::string& field) {
    try {
      scenario_from_json(doc);
      ADD_FAILURE() << "accepted " << doc.dump();
    } catch (const ConfigError& e) {
      EXPECT_EQ(e.field(), field) << e.what();
    }
  };
  auto base = nlohmann::json::parse(kFfm);
  auto d = base;
  d.erase("rules");
  expect_field(d, "rules");
  d = base;
  d["major"]["support"] = "high";
  expect_field(d, "major.support");
  d = base;
  d["surprise"] = 1;
  expect_field(d, "surprise");
  d = base;
  d["major"]["support"] = 13.12345;
  expect_field(d, "major.support");
  d = base;
  d["minor"]["sigma"] = -1;
  expect_field(d, "minor.sigma");
  d = base;
  d["rules"]["seats"] = 2.5;
  expect_field(d, "rules.seats");
  d = base;
  d.erase("mandate_value");
  expect_field(d, "mandate_value");
  EXPECT_THROW(load_scenario("{not json"), ConfigError);
}

TEST(LoadScenario, EstimatesMandateValueFromPoll) {
  auto doc = nlohmann::json::parse(kFfm);
  doc.erase("mandate_value");
  doc["full_poll"] = {{{"name", "a"}, {"support", 60.0}}, {{"name", "b"}, {"support", 33.15}},
                      {{"name", "c"}, {"support", 2.0}}};
  const auto sc = scenario_from_json(doc);
  EXPECT_NEAR(sc.mandate_value, 1.15, 1e-12);
  EXPECT_EQ(sc.votes_needed, 0.15);
}

TEST(LoadScenario, RoundTripIsAFixedPoint) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> major(301, 3999), minor(0, 299), y(50, 300);
  for (int trial = 0; trial < 200; ++trial) {
    nlohmann::json doc = nlohmann::json::parse(kFfm);
    doc["major"]["support"] = major(rng) / 100.0;
    doc["minor"]["support"] = minor(rng) / 100.0;
    if (trial % 2) {
      doc["mandate_value"] = y(rng) / 100.0;
    } else {
      doc.erase("mandate_value");
      doc["full_poll"] = {{{"name", "x"}, {"support", major(rng) / 100.0}},
                          {{"name", "y"}, {"support", minor(rng) / 100.0}}};
    }
    const auto once = scenario_from_json(doc);
    const auto text = to_json(once).dump();
    const auto twice = load_scenario(text);
    EXPECT_EQ(to_json(twice).dump(), text);
    EXPECT_EQ(twice.strike, once.strike);
    EXPECT_EQ(twice.votes_needed, once.votes_needed);
  }
}

TEST(Dhondt, SingleQualifierTakesAllSeats) { EXPECT_EQ(seats_of({100.0}, 3.0, 81), std::vector<int>{81}); }

TEST(Dhondt, MatchesQuotientTableExample) {
  // Quotient table: 100 50 33.3 25 | 80 40 26.7 | 30 are the top eight.
  EXPECT_EQ(seats_of({100, 80, 30}, 0.0, 8), (std::vector<int>{4, 3, 1}));
}

TEST(Dhondt, TieGoesToLowerIndex) { EXPECT_EQ(seats_of({50, 50}, 3.0, 3), (std::vector<int>{2, 1})); }

TEST(Dhondt, BelowThresholdGetsNothing) {
  EXPECT_EQ(seats_of({20.0, 2.9, 10.0}, 3.0, 9), (std::vector<int>{6, 0, 3}));
}

TEST(Dhondt, NoQualifyingListIsAnError) {
  try {
    seats_of({1.0, 2.0}, 3.0, 5);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("no qualifying list"), std::string::npos);
  }
}

TEST(Dhondt, RandomInstancesMatchOracleConserveSeatsAndAreMonotone) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> parties(1, 6), seats(1, 20), pct(0, 4000);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> v(parties(rng));
    for (auto& x : v) x = pct(rng) / 100.0;
    v[0] = std::max(v[0], 3.0);
    const int s = seats(rng);
    const auto got = seats_of(v, 3.0, s);
    EXPECT_EQ(got, oracle::dhondt_table(v, 3.0, s));
    int sum = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      sum += got[i];
      if (v[i] < 3.0) EXPECT_EQ(got[i], 0);
    }
    EXPECT_EQ(sum, s);

    auto bumped = v;
    const std::size_t who = rng() % v.size();
    bumped[who] += pct(rng) / 100.0;
    EXPECT_GE(seats_of(bumped, 3.0, s)[who], got[who]);
  }
}

TEST(Dhondt, PlugPointAcceptsOtherDivisors) {
  // Sainte-Lague divisors 1, 3, 5, ...; the second case differs from d'Hondt.
  const std::vector<double> v{100, 80, 30};
  const auto r = highest_averages(std::span<const double>(v), rules(0.0, 8),
                                  [](int won) { return 2.0 * won + 1.0; });
  EXPECT_EQ(r.seats, (std::vector<int>{4, 3, 1}));
  const std::vector<double> w{53, 24, 23};
  EXPECT_EQ(highest_averages(std::span<const double>(w), rules(0.0, 7), [](int k) { return 2.0 * k + 1.0; }).seats,
            (std::vector<int>{3, 2, 2}));
  EXPECT_EQ(seats_of(w, 0.0, 7), (std::vector<int>{4, 2, 1}));
}

TEST(MandateValue, PoolOverSeats) {
  const std::vector<double> a{60.0, 33.15, 2.0};
  EXPECT_NEAR(mandate_value(std::span<const double>(a), rules(3.0, 81)), 1.15, 1e-12);
  const std::vector<double> b{81.0};
  EXPECT_DOUBLE_EQ(mandate_value(std::span<const double>(b), rules(3.0, 81)), 1.0);
  const std::vector<double> c{50.0, 50.0};
  EXPECT_NEAR(mandate_value(std::span<const double>(c), rules(3.0, 81)), 1.2345679, 1e-7);
  const std::vector<double> none{1.0, 2.0};
  EXPECT_THROW(mandate_value(std::span<const double>(none), rules(3.0, 81)), ConfigError);
}

TEST(MandateValue, ShrinksWithTheQualifyingPool) {
  const std::vector<double> big{60.0, 30.0}, small{60.0, 20.0};
  EXPECT_LT(mandate_value(std::span<const double>(small), rules(3.0, 81)),
            mandate_value(std::span<const double>(big), rules(3.0, 81)));
}

TEST(VotesNeeded, WorkedScenarioShortfalls) {
  EXPECT_EQ(votes_needed(1.0, 1.15), 0.15);
  EXPECT_EQ(votes_needed(2.2, 1.15), 0.1);
  EXPECT_EQ(votes_needed(2.3, 1.15), 0.0);
  EXPECT_EQ(votes_needed(0.0, 1.15), 0.0);
  EXPECT_THROW(votes_needed(1.0, 0.0), ConfigError);
  EXPECT_THROW(votes_needed(1.0, -1.0), ConfigError);
}

TEST(VotesNeeded, BracketsTheNextMandate) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> s2(0.0, 10.0), y(0.05, 3.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const double s = trial % 3 ? s2(rng) : std::round(s2(rng) * 1e4) / 1e4;
    const double m = trial % 3 ? y(rng) : std::round(y(rng) * 1e4) / 1e4;
    const long long k = next_mandate_index(s, m);
    const double need = votes_needed(s, m);
    EXPECT_LT((k - 1) * m - s, 1e-9 * std::max(1.0, s));
    EXPECT_GE(k * m - s, -1e-9 * std::max(1.0, s));
    EXPECT_GE(need, 0.0);
    EXPECT_LT(need, m + 1e-12);
  }
}
