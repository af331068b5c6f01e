#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ppvrule/doolr.hpp"
#include "ppvrule/harness.hpp"
#include "ppvrule/rng.hpp"
#include "ppvrule/simgen.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace ppvrule;

namespace {

Dataset gaussian_data(std::size_t n, std::size_t p, double case_rate, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledSample> rows;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    for (std::size_t j = 0; j < p; ++j) s.features.push_back(rng.normal());
    s.label = rng.uniform() < case_rate ? 1 : 0;
    rows.push_back(std::move(s));
  }
  return make_dataset(rows, names);
}

Dataset separable_toy(std::size_t per_class) {
  Rng rng(404);
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < per_class; ++i) {
    rows.push_back({{2.0 + 0.1 * rng.normal(), 2.0 + 0.1 * rng.normal()}, 1, std::nullopt});
    rows.push_back({{-2.0 + 0.1 * rng.normal(), -2.0 + 0.1 * rng.normal()}, 0, std::nullopt});
  }
  return make_dataset(rows, {"a", "b"});
}

}  // namespace

TEST_CASE("kappa grid construction") {
  auto g = uniform_kappa_grid();
  CHECK(g.size() == 101);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(0.995));
  CHECK(std::is_sorted(g.begin(), g.end()));
}

TEST_CASE("objective special cases") {
  Dataset d = gaussian_data(120, 2, 0.3, 7);
  PrevalenceSpec prev(0.01);
  double h = 0.4;

  // kappa = 0 leaves only the surrogate TPR term
  std::vector<double> beta = {0.2, 0.7, -1.1};
  auto [tpr_s, fpr_s] = smoothed_rates(beta, d, h);
  CHECK(doolr_objective(beta, d, 0.0, 0.04, prev, h) == doctest::Approx(tpr_s).epsilon(1e-15));

  // zero coefficients give Phi(0) = 1/2 on both terms
  std::vector<double> zero = {0.0, 0.0, 0.0};
  for (double kappa : {0.0, 0.3, 0.9}) {
    double w1 = 1.0 - kappa + kappa * prev.gamma() * 0.96;
    double expect = w1 * 0.5 - kappa * 0.04 * 0.5;
    CHECK(doolr_objective(zero, d, kappa, 0.04, prev, h) ==
          doctest::Approx(expect).epsilon(1e-15));
  }
  (void)fpr_s;
}

TEST_CASE("gradient matches central finite differences") {
  Dataset d = gaussian_data(200, 3, 0.25, 11);
  PrevalenceSpec prev(0.01);
  Rng rng(13);
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<double> beta;
    for (int j = 0; j < 4; ++j) beta.push_back(rng.normal());
    double kappa = 0.95 * rng.uniform();
    double h = 0.2 + rng.uniform();
    auto grad = doolr_gradient(beta, d, kappa, 0.04, prev, h);
    auto fd = oracle::finite_diff_gradient(
        [&](const std::vector<double>& b) { return doolr_objective(b, d, kappa, 0.04, prev, h); },
        beta);
    for (std::size_t j = 0; j < grad.size(); ++j) {
      double denom = std::max(std::abs(fd[j]), 1e-8);
      CHECK(std::abs(grad[j] - fd[j]) / denom < 1e-5);
    }
  }
}

TEST_CASE("gradient vanishes far from the data and is antisymmetric") {
  Dataset d = gaussian_data(100, 2, 0.3, 17);
  PrevalenceSpec prev(0.01);
  std::vector<double> far = {100.0, 3.0, -2.0};
  auto g = doolr_gradient(far, d, 0.4, 0.04, prev, 0.05);
  for (double v : g) CHECK(std::abs(v) < 1e-12);

  // negating features and slopes negates the slope gradient
  Dataset neg = d;
  for (auto& s : neg.samples)
    for (double& v : s.features) v = -v;
  std::vector<double> beta = {0.1, 0.8, -0.3};
  std::vector<double> nbeta = {0.1, -0.8, 0.3};
  auto g1 = doolr_gradient(beta, d, 0.4, 0.04, prev, 0.3);
  auto g2 = doolr_gradient(nbeta, neg, 0.4, 0.04, prev, 0.3);
  CHECK(g2[0] == doctest::Approx(g1[0]).epsilon(1e-12));
  CHECK(g2[1] == doctest::Approx(-g1[1]).epsilon(1e-12));
  CHECK(g2[2] == doctest::Approx(-g1[2]).epsilon(1e-12));
}

TEST_CASE("maximize_for_kappa ascends from its start") {
  Dataset d = separable_toy(40);
  PrevalenceSpec prev(0.01);
  DoolrConfig cfg;
  cfg.alpha = 0.04;
  cfg.smoothing.method = SmoothingSpec::Method::Fixed;
  cfg.smoothing.fixed_h = 0.3;
  cfg.restarts = 3;
  cfg.seed = 5;
  std::vector<double> init = {0.1, 0.2, 0.1};
  auto beta = maximize_for_kappa(d, 0.0, cfg, prev, init);
  double got = doolr_objective(beta, d, 0.0, cfg.alpha, prev, 0.3);
  double at_init = doolr_objective(init, d, 0.0, cfg.alpha, prev, 0.3);
  CHECK(got >= at_init);
  CHECK(got >= 0.99);  // separable: surrogate TPR can approach 1
}

TEST_CASE("maximize_for_kappa reaches the dense random-search level") {
  Dataset d = gen_linear(200, false, 2024);
  PrevalenceSpec prev(0.01);
  const double h = 0.3, kappa = 0.5, alpha = 0.04;
  DoolrConfig cfg;
  cfg.alpha = alpha;
  cfg.smoothing.method = SmoothingSpec::Method::Fixed;
  cfg.smoothing.fixed_h = h;
  cfg.restarts = 4;
  cfg.seed = 31;

  LogisticFit lf = fit_logistic(d);
  std::vector<double> init = {lf.intercept, lf.slopes[0], lf.slopes[1]};
  auto beta = maximize_for_kappa(d, kappa, cfg, prev, init);
  double got = doolr_objective(beta, d, kappa, alpha, prev, h);

  // dense direction x intercept sweep
  const double w1 = 1.0 - kappa + kappa * prev.gamma() * (1.0 - alpha);
  const double w0 = kappa * alpha;
  Rng rng(99);
  double best = -1e300;
  std::vector<double> proj(d.size());
  const int dirs = 8000, cuts = 30;
  for (int k = 0; k < dirs; ++k) {
    double theta = 2.0 * 3.14159265358979323846 * rng.uniform();
    double ux = std::cos(theta), uy = std::sin(theta);
    double lo = 1e300, hi = -1e300;
    for (std::size_t i = 0; i < d.size(); ++i) {
      proj[i] = ux * d.samples[i].features[0] + uy * d.samples[i].features[1];
      lo = std::min(lo, proj[i]);
      hi = std::max(hi, proj[i]);
    }
    for (int c = 0; c < cuts; ++c) {
      double b = lo - 0.5 + (hi - lo + 1.0) * (c + 0.5) / cuts;
      double s1 = 0.0, s0 = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) {
        double v = normal_cdf((proj[i] - b) / h);
        if (d.samples[i].label == 1)
          s1 += v;
        else
          s0 += v;
      }
      double obj = w1 * s1 / static_cast<double>(d.n1) - w0 * s0 / static_cast<double>(d.n0);
      best = std::max(best, obj);
    }
  }
  CHECK(got >= best - 1e-3);
}

TEST_CASE("doolr_fit on a separable toy set") {
  Dataset d = separable_toy(20);
  PrevalenceSpec prev(0.01);
  DoolrConfig cfg;
  cfg.alpha = 0.5;
  cfg.kappa_grid = uniform_kappa_grid(21);
  cfg.restarts = 2;
  cfg.seed = 8;
  FittedRule r = doolr_fit(d, prev, cfg);
  CHECK(r.feasible);
  CHECK(r.train_metrics.tpr == 1.0);
  CHECK(r.train_metrics.ppv == 1.0);
  double norm = r.rule.intercept * r.rule.intercept;
  for (double s : r.rule.slopes) norm += s * s;
  CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-10);
  CHECK(r.lambda_hat == doctest::Approx(r.kappa_hat / (1.0 - r.kappa_hat)));
}

TEST_CASE("doolr_fit is invariant to sample order") {
  Dataset d = gen_linear(400, false, 606);
  PrevalenceSpec prev(0.01);
  DoolrConfig cfg;
  cfg.alpha = 0.04;
  cfg.kappa_grid = uniform_kappa_grid(11);
  cfg.restarts = 2;
  cfg.seed = 9;
  FittedRule a = doolr_fit(d, prev, cfg);

  Dataset shuffled = d;
  Rng rng(1234);
  for (std::size_t i = shuffled.samples.size(); i > 1; --i)
    std::swap(shuffled.samples[i - 1], shuffled.samples[rng.below(i)]);
  shuffled.recount();
  FittedRule b = doolr_fit(shuffled, prev, cfg);

  CHECK(a.rule.intercept == b.rule.intercept);
  CHECK(a.rule.slopes == b.rule.slopes);
  CHECK(a.kappa_hat == b.kappa_hat);
  CHECK(a.h == b.h);
}

TEST_CASE("selection prefers feasible candidates") {
  Dataset d = gen_linear(800, false, 909);
  PrevalenceSpec prev(0.01);
  DoolrConfig cfg;
  cfg.alpha = 0.04;
  cfg.kappa_grid = uniform_kappa_grid(21);
  cfg.restarts = 2;
  cfg.seed = 10;
  FittedRule r = doolr_fit(d, prev, cfg);
  if (r.feasible) CHECK(r.train_metrics.ppv >= cfg.alpha - cfg.feasibility_tol);
  CHECK(r.h > 0.0);
}

TEST_CASE("train TPR stays near the exhaustive two-feature oracle") {
  PrevalenceSpec prev(0.01);
  for (std::uint64_t seed : {71u, 72u}) {
    Dataset d = gen_linear(500, false, seed);
    DoolrConfig cfg;
    cfg.alpha = 0.04;
    cfg.kappa_grid = uniform_kappa_grid(26);
    cfg.restarts = 2;
    cfg.seed = seed;
    FittedRule r = doolr_fit(d, prev, cfg);
    LinearRule oracle_rule = brute_force_best_linear(d, 0.04, prev, 720);
    auto [otpr, ofpr] = empirical_rates(oracle_rule, d);
    double oppv = ppv(otpr, ofpr, prev);
    REQUIRE(r.feasible);
    REQUIRE(oppv >= 0.04);
    CHECK(std::abs(r.train_metrics.tpr - otpr) <= 0.03);
  }
}

TEST_CASE("degenerate data is rejected") {
  std::vector<LabeledSample> rows;
  rows.push_back({{1.0}, 1, std::nullopt});
  rows.push_back({{2.0}, 1, std::nullopt});
  rows.push_back({{0.0}, 0, std::nullopt});
  Dataset d = make_dataset(rows, {"x"});
  PrevalenceSpec prev(0.01);
  DoolrConfig cfg;
  CHECK_THROWS_AS(doolr_fit(d, prev, cfg), std::invalid_argument);  // single control
}
