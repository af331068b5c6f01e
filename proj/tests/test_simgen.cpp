#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ppvrule/glm.hpp"
#include "ppvrule/rng.hpp"
#include "ppvrule/simgen.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace ppvrule;

namespace {

double prevalence(const Dataset& d) {
  return static_cast<double>(d.n1) / static_cast<double>(d.size());
}

bool identical(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.samples[i].label != b.samples[i].label) return false;
    if (a.samples[i].features != b.samples[i].features) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("linear generator prevalence and contamination") {
  Dataset d = gen_linear(100000, false, 7);
  CHECK(prevalence(d) >= 0.007);
  CHECK(prevalence(d) <= 0.013);

  Dataset c = gen_linear(1000, true, 7);
  CHECK(c.size() == 1060);  // ceil(0.06 * 1000) appended rows
  for (std::size_t i = 1000; i < c.size(); ++i) {
    CHECK(c.samples[i].label == 0);
    CHECK(c.samples[i].features == std::vector<double>{6.0, 6.0});
  }

  CHECK(identical(gen_linear(500, true, 42), gen_linear(500, true, 42)));
  CHECK_FALSE(identical(gen_linear(500, true, 42), gen_linear(500, true, 43)));
}

TEST_CASE("piecewise generator") {
  const std::size_t n = 100000;
  Dataset d = gen_piecewise(n, 11);
  CHECK(prevalence(d) >= 0.006);
  CHECK(prevalence(d) <= 0.014);

  CHECK(piecewise_quantile() ==
        doctest::Approx(oracle::normal_quantile(0.025)).epsilon(1e-5));

  // replay the generator's draw order to recover the pre-relabel labels:
  // every difference must be a below-quantile row switched to diseased
  Rng rng(11);
  const double q = piecewise_quantile();
  std::size_t switched = 0, pocket = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x1 = rng.normal();
    double x2 = rng.normal();
    double eps = rng.logistic();
    REQUIRE(d.samples[i].features[0] == x1);
    REQUIRE(d.samples[i].features[1] == x2);
    double lin = -8.9 + 2.0 * x1 + (x2 > q ? 2.0 * x2 : 0.0);
    int pre = lin + eps > 0.0 ? 1 : 0;
    pocket += x2 <= q;
    if (d.samples[i].label != pre) {
      CHECK(d.samples[i].label == 1);
      CHECK(x2 <= q);
      ++switched;
    }
  }
  CHECK(pocket > 2000);
  // 0.4% of n drawn from the pocket; some draws may have been diseased already
  CHECK(switched <= 400);
  CHECK(switched >= 300);
}

TEST_CASE("nonlinear generator and its noise-free hook") {
  Dataset d = gen_nonlinear(100000, 13);
  CHECK(prevalence(d) >= 0.006);
  CHECK(prevalence(d) <= 0.014);
  CHECK(identical(gen_nonlinear(2000, 5), gen_nonlinear(2000, 5)));

  Dataset nf = gen_nonlinear(5000, 13, true);
  for (const auto& s : nf.samples) {
    double lin = -8.6 + 5.0 * std::sin(s.features[0]) - 4.0 * s.features[1] * s.features[1] +
                 3.0 * std::cos(s.features[2]);
    CHECK(s.label == (lin > 0.0 ? 1 : 0));
  }
}

TEST_CASE("label mechanisms agree in distribution") {
  // Bernoulli(logistic(s)) versus 1{s + logistic noise > 0}
  const std::size_t n = 1000000;
  Rng ra(101), rb(202);
  std::size_t count_a = 0, count_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = -8.7 + 2.4 * ra.normal() + 2.4 * ra.normal();
    double p = 1.0 / (1.0 + std::exp(-s));
    count_a += ra.uniform() < p;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = -8.7 + 2.4 * rb.normal() + 2.4 * rb.normal();
    count_b += s + rb.logistic() > 0.0;
  }
  double p1 = static_cast<double>(count_a) / n;
  double p2 = static_cast<double>(count_b) / n;
  double pooled = 0.5 * (p1 + p2);
  double se = std::sqrt(2.0 * pooled * (1.0 - pooled) / n);
  double z = (p1 - p2) / se;
  CHECK(oracle::normal_two_sided_pvalue(z) > 0.001);
}

TEST_CASE("external scenarios") {
  auto [d1, e1] = gen_external(100000, 1, 17);
  REQUIRE(e1.values.size() == d1.size());
  CHECK(e1.mode == ExternalMode::Score);
  // scenario I: decisions agree with the realized labels wherever the margin
  // is large (logistic noise rarely flips a 3+ margin)
  std::size_t agree = 0, big = 0;
  for (std::size_t i = 0; i < d1.size(); ++i) {
    double m = e1.values[i];
    if (std::abs(m) <= 3.0) continue;
    ++big;
    agree += (m > 0.0 ? 1 : 0) == d1.samples[i].label;
  }
  REQUIRE(big > 1000);
  CHECK(static_cast<double>(agree) / big >= 0.95);

  // scenario II margins carry no x2/x3 contribution
  auto [d2, e2] = gen_external(5000, 2, 19);
  for (std::size_t i = 0; i < d2.size(); ++i)
    CHECK(e2.values[i] == -8.6 + 5.0 * std::sin(d2.samples[i].features[0]));

  // scenario III flags almost nobody
  auto [d3, e3] = gen_external(100000, 3, 23);
  std::size_t pos = 0;
  for (double v : e3.values) pos += v > 0.0;
  CHECK(static_cast<double>(pos) / d3.size() < 0.01);
  (void)d3;

  CHECK_THROWS_AS(gen_external(100, 4, 1), std::invalid_argument);
}

TEST_CASE("nested case-control sampling") {
  Dataset d = gen_nested_cc(100, 29);
  CHECK(d.size() == 2100);
  CHECK(d.n1 == 100);
  CHECK(d.n0 == 2000);
  CHECK(d.sampling_design == SamplingDesign::CaseControl);
  CHECK(identical(gen_nested_cc(50, 31), gen_nested_cc(50, 31)));
}

TEST_CASE("case-control adjustment restores cohort calibration") {
  // reference: a large cohort-mechanism sample with the same contamination
  Rng rng(37);
  std::vector<LabeledSample> rows;
  const std::size_t big = 300000;
  for (std::size_t i = 0; i < big; ++i) {
    double x1 = rng.normal(), x2 = rng.normal();
    double p = 1.0 / (1.0 + std::exp(-(-8.0 + 2.1 * x1 + 2.1 * x2)));
    rows.push_back({{x1, x2}, rng.uniform() < p ? 1 : 0, std::nullopt});
  }
  for (std::size_t i = 0; i < big * 6 / 100; ++i) rows.push_back({{6.0, 6.0}, 0, std::nullopt});
  Dataset cohort = make_dataset(rows, {"x1", "x2"});
  LogisticFit cohort_fit = fit_logistic(cohort);

  Dataset cc = gen_nested_cc(2000, 41);
  PrevalenceSpec prev(0.01);
  LogisticFit raw = fit_logistic(cc);
  LogisticFit adj = case_control_adjust(raw, cc.n1, cc.n0, prev);

  double shift = std::log(prev.p1 * 20.0 / prev.p0());
  CHECK(adj.intercept - raw.intercept == doctest::Approx(shift).epsilon(1e-12));
  CHECK(shift == doctest::Approx(std::log(20.0 * 0.01 / 0.99)).epsilon(1e-12));
  CHECK(std::abs(adj.intercept - cohort_fit.intercept) < 0.15);
}

TEST_CASE("scenario names round trip") {
  for (auto kind : {ScenarioKind::Linear, ScenarioKind::LinearContaminated,
                    ScenarioKind::Piecewise, ScenarioKind::Nonlinear, ScenarioKind::ExternalI,
                    ScenarioKind::ExternalII, ScenarioKind::ExternalIII,
                    ScenarioKind::NestedCaseControl})
    CHECK(scenario_from_name(scenario_name(kind)) == kind);
  CHECK_THROWS_AS(scenario_from_name("bogus"), std::invalid_argument);
}
