#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ppvrule/rng.hpp"
#include "ppvrule/types.hpp"

#include <cmath>

using namespace ppvrule;

TEST_CASE("linear rule decisions") {
  LinearRule r1{0.0, {1.0}, std::nullopt};
  CHECK(r1.decide({2.0}) == 1);
  CHECK(r1.decide({0.0}) == 0);  // boundary score is not flagged

  LinearRule r2{-1.0, {2.0, -1.0}, std::nullopt};
  CHECK(r2.decide({1.0, 0.5}) == 1);  // -1 + 2 - 0.5 = 0.5 > 0

  CHECK_THROWS_AS((void)r1.decide({1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("scale invariance of decisions") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    LinearRule rule;
    rule.intercept = rng.normal();
    rule.slopes = {rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
    if (rule.score(x) == 0.0) continue;
    double c = 0.1 + 5.0 * rng.uniform();
    LinearRule scaled;
    scaled.intercept = c * rule.intercept;
    scaled.slopes = {c * rule.slopes[0], c * rule.slopes[1], c * rule.slopes[2]};
    CHECK(rule.decide(x) == scaled.decide(x));
  }
}

TEST_CASE("standardization is applied before scoring") {
  LinearRule rule;
  rule.intercept = 0.0;
  rule.slopes = {1.0};
  rule.standardization = FeatureScaling{{10.0}, {2.0}};
  CHECK(rule.score({12.0}) == doctest::Approx(1.0));
  CHECK(rule.decide({9.0}) == 0);
}

TEST_CASE("prevalence round trip") {
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    double p1 = 1e-4 + 0.998 * rng.uniform();
    PrevalenceSpec prev(p1);
    double g = prev.gamma();
    CHECK(g / (1.0 + g) == doctest::Approx(p1).epsilon(1e-12));
  }
  CHECK_THROWS_AS(PrevalenceSpec(0.0), std::invalid_argument);
  CHECK_THROWS_AS(PrevalenceSpec(1.0), std::invalid_argument);
}

TEST_CASE("dataset validation") {
  std::vector<LabeledSample> rows;
  rows.push_back({{1.0, 2.0}, 1, std::nullopt});
  rows.push_back({{0.5, -1.0}, 0, std::nullopt});
  Dataset d = make_dataset(rows, {"a", "b"});
  CHECK(d.n1 == 1);
  CHECK(d.n0 == 1);
  CHECK(d.size() == 2);
  CHECK(d.dim() == 2);

  auto bad_len = rows;
  bad_len.push_back({{1.0}, 0, std::nullopt});
  CHECK_THROWS_AS(make_dataset(bad_len, {"a", "b"}), std::invalid_argument);
  auto bad_val = rows;
  bad_val.push_back({{std::nan(""), 0.0}, 0, std::nullopt});
  CHECK_THROWS_AS(make_dataset(bad_val, {"a", "b"}), std::invalid_argument);
  auto bad_lab = rows;
  bad_lab.push_back({{1.0, 1.0}, 2, std::nullopt});
  CHECK_THROWS_AS(make_dataset(bad_lab, {"a", "b"}), std::invalid_argument);
}

TEST_CASE("external rule modes") {
  ExternalRule score{ExternalMode::Score, {1.5, -0.2, 0.0}};
  score.validate();
  ExternalRule dec = score.as_decision();
  CHECK(dec.mode == ExternalMode::Decision);
  CHECK(dec.values == std::vector<double>{1.0, -1.0, -1.0});
  dec.validate();

  ExternalRule bad{ExternalMode::Decision, {0.5}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
