#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ppvrule/itdoolr.hpp"
#include "ppvrule/metrics.hpp"
#include "ppvrule/rng.hpp"
#include "ppvrule/simgen.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace ppvrule;

namespace {

Dataset toy_with_signals(ExternalRule* ext, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<LabeledSample> rows;
  ext->mode = ExternalMode::Decision;
  ext->values.clear();
  for (int i = 0; i < 40; ++i) {
    rows.push_back({{3.0 + 0.3 * rng.normal(), 0.3 * rng.normal()}, 1, std::nullopt});
    ext->values.push_back(1.0);
  }
  for (int i = 0; i < 40; ++i) {
    rows.push_back({{-3.0 + 0.3 * rng.normal(), 0.3 * rng.normal()}, 1, std::nullopt});
    ext->values.push_back(-1.0);
  }
  for (int i = 0; i < 30; ++i) {
    rows.push_back({{0.3 * rng.normal(), -3.0 + 0.3 * rng.normal()}, 0, std::nullopt});
    ext->values.push_back(-1.0);
  }
  return make_dataset(rows, {"a", "b"});
}

}  // namespace

TEST_CASE("penalty worked examples") {
  // zero coefficients: Phi(0) = 1/2 regardless of signals
  ExternalRule ext{ExternalMode::Decision, {1.0, -1.0, 1.0}};
  std::vector<LabeledSample> rows;
  rows.push_back({{0.4}, 1, std::nullopt});
  rows.push_back({{-0.2}, 1, std::nullopt});
  rows.push_back({{0.1}, 0, std::nullopt});
  Dataset d = make_dataset(rows, {"x"});
  CHECK(penalty({0.0, 0.0}, d, ext, 1.0) == doctest::Approx(0.5).epsilon(1e-15));

  // single case with score 1 and opposing signal at h = 1: Phi(1)
  ExternalRule one_ext{ExternalMode::Decision, {-1.0, 1.0}};
  std::vector<LabeledSample> one;
  one.push_back({{1.0}, 1, std::nullopt});
  one.push_back({{0.0}, 0, std::nullopt});
  Dataset d1 = make_dataset(one, {"x"});
  double got = penalty({0.0, 1.0}, d1, one_ext, 1.0);
  CHECK(got == doctest::Approx(oracle::normal_cdf(1.0)).epsilon(1e-12));
  CHECK(got == doctest::Approx(0.841345).epsilon(1e-5));

  // agreement limit: when every case score matches its signal sign, the
  // penalty vanishes as h shrinks
  ExternalRule agree{ExternalMode::Decision, {1.0, -1.0, 1.0}};
  std::vector<LabeledSample> arows;
  arows.push_back({{2.0}, 1, std::nullopt});
  arows.push_back({{-1.5}, 1, std::nullopt});
  arows.push_back({{0.5}, 0, std::nullopt});
  Dataset da = make_dataset(arows, {"x"});
  double prev_pen = 1.0;
  for (double h : {1.0, 0.1, 0.001}) {
    double p = penalty({0.0, 1.0}, da, agree, h);
    CHECK(p <= prev_pen);
    prev_pen = p;
  }
  CHECK(prev_pen < 1e-9);

  // missing signals are rejected
  ExternalRule bad{ExternalMode::Decision, {1.0}};
  CHECK_THROWS_AS(penalty({0.0, 1.0}, da, bad, 1.0), std::invalid_argument);
}

TEST_CASE("penalty stays within [0, 1] and has sign symmetry") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LabeledSample> rows;
    ExternalRule ext{ExternalMode::Score, {}};
    for (int i = 0; i < 30; ++i) {
      rows.push_back({{rng.normal(), rng.normal()}, i % 3 == 0 ? 1 : 0, std::nullopt});
      ext.values.push_back(rng.normal());
    }
    Dataset d = make_dataset(rows, {"a", "b"});
    std::vector<double> beta = {rng.normal(), rng.normal(), rng.normal()};
    double h = 0.1 + rng.uniform();
    double p = penalty(beta, d, ext, h);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);

    // flipping all signals and negating beta leaves the penalty unchanged
    ExternalRule flipped = ext;
    for (double& v : flipped.values) v = -v;
    std::vector<double> nbeta = {-beta[0], -beta[1], -beta[2]};
    CHECK(penalty(nbeta, d, flipped, h) == p);
  }
}

TEST_CASE("objective reduces to the plain one at eta = 0") {
  Rng rng(7);
  ExternalRule ext{ExternalMode::Score, {}};
  std::vector<LabeledSample> rows;
  for (int i = 0; i < 60; ++i) {
    rows.push_back({{rng.normal(), rng.normal()}, i % 5 == 0 ? 1 : 0, std::nullopt});
    ext.values.push_back(rng.normal());
  }
  Dataset d = make_dataset(rows, {"a", "b"});
  PrevalenceSpec prev(0.01);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> beta = {rng.normal(), rng.normal(), rng.normal()};
    double kappa = 0.9 * rng.uniform();
    double h = 0.2 + rng.uniform();
    double a = itdoolr_objective(beta, d, ext, kappa, 0.0, 0.04, prev, h);
    double b = doolr_objective(beta, d, kappa, 0.04, prev, h);
    CHECK(a == b);
  }
}

TEST_CASE("penalized gradient matches finite differences") {
  Rng rng(11);
  ExternalRule ext{ExternalMode::Score, {}};
  std::vector<LabeledSample> rows;
  for (int i = 0; i < 80; ++i) {
    rows.push_back({{rng.normal(), rng.normal()}, i % 4 == 0 ? 1 : 0, std::nullopt});
    ext.values.push_back(2.0 * rng.normal());
  }
  Dataset d = make_dataset(rows, {"a", "b"});
  PrevalenceSpec prev(0.01);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> beta = {rng.normal(), rng.normal(), rng.normal()};
    double kappa = 0.9 * rng.uniform();
    double eta = 2.0 * rng.uniform();
    double h = 0.3 + rng.uniform();
    auto grad = itdoolr_gradient(beta, d, ext, kappa, eta, 0.04, prev, h);
    auto fd = oracle::finite_diff_gradient(
        [&](const std::vector<double>& b) {
          return itdoolr_objective(b, d, ext, kappa, eta, 0.04, prev, h);
        },
        beta);
    for (std::size_t j = 0; j < grad.size(); ++j) {
      double denom = std::max(std::abs(fd[j]), 1e-8);
      CHECK(std::abs(grad[j] - fd[j]) / denom < 1e-5);
    }
  }
}

TEST_CASE("a dominant penalty aligns case decisions with the signals") {
  ExternalRule ext;
  Dataset d = toy_with_signals(&ext, 19);
  PrevalenceSpec prev(0.01);
  const double h = 0.5, eta = 1000.0, kappa = 0.2, alpha = 0.04;

  // test-side gradient ascent on the penalized objective
  std::vector<double> beta = {0.1, 0.5, 0.2};
  for (int it = 0; it < 400; ++it) {
    auto g = itdoolr_gradient(beta, d, ext, kappa, eta, alpha, prev, h);
    double step = 1.0;
    double cur = itdoolr_objective(beta, d, ext, kappa, eta, alpha, prev, h);
    for (int ls = 0; ls < 30; ++ls) {
      std::vector<double> cand = beta;
      for (std::size_t j = 0; j < beta.size(); ++j) cand[j] += step * g[j];
      if (itdoolr_objective(cand, d, ext, kappa, eta, alpha, prev, h) > cur) {
        beta = cand;
        break;
      }
      step *= 0.5;
    }
  }
  std::size_t agree = 0, counted = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& s = d.samples[i];
    if (s.label != 1) continue;
    double score = beta[0] + beta[1] * s.features[0] + beta[2] * s.features[1];
    if (std::abs(score) <= h) continue;
    ++counted;
    agree += (score > 0.0) == (ext.values[i] > 0.0);
  }
  REQUIRE(counted >= 40);
  CHECK(static_cast<double>(agree) / counted >= 0.95);
}

TEST_CASE("select_eta guards and edges") {
  ExternalRule ext;
  Dataset d = toy_with_signals(&ext, 23);
  PrevalenceSpec prev(0.01);
  ItConfig cfg;
  cfg.base.alpha = 0.2;
  cfg.base.kappa_grid = uniform_kappa_grid(6);
  cfg.base.restarts = 1;

  ItConfig singleton = cfg;
  singleton.eta_grid = {0.0};
  CHECK(select_eta(d, ext, prev, singleton) == 0.0);

  ItConfig no_zero = cfg;
  no_zero.eta_grid = {0.5, 1.0};
  CHECK_THROWS_AS(select_eta(d, ext, prev, no_zero), std::invalid_argument);

  ItConfig too_many_folds = cfg;
  too_many_folds.cv_folds = 40;  // more folds than controls
  CHECK_THROWS_AS(select_eta(d, ext, prev, too_many_folds), std::invalid_argument);
}

TEST_CASE("noise signals keep eta at zero in most replicates") {
  PrevalenceSpec prev(0.01);
  int zeros = 0;
  const int reps = 10;
  for (int r = 0; r < reps; ++r) {
    std::uint64_t rs = 900 + static_cast<std::uint64_t>(r) * kReplicateStride;
    Dataset train = gen_nonlinear(900, derive_seed(rs, 1));
    ExternalRule noise{ExternalMode::Decision, {}};
    Rng rng(derive_seed(rs, 2));
    for (std::size_t i = 0; i < train.size(); ++i)
      noise.values.push_back(rng.uniform() < 0.5 ? 1.0 : -1.0);
    ItConfig cfg;
    cfg.base.alpha = 0.04;
    cfg.base.seed = derive_seed(rs, 3);
    cfg.base.restarts = 1;
    cfg.base.kappa_grid = uniform_kappa_grid(11);
    cfg.cv_folds = 3;
    cfg.eta_grid = {0.0, 0.5, 2.0};
    zeros += select_eta(train, noise, prev, cfg) == 0.0;
  }
  CHECK(zeros * 2 > reps);  // majority
}

TEST_CASE("singleton eta grid reproduces the plain fit bit for bit") {
  auto [train, ext] = gen_external(700, 1, 3131);
  PrevalenceSpec prev(0.01);
  DoolrConfig base;
  base.alpha = 0.04;
  base.seed = 77;
  base.restarts = 2;
  base.kappa_grid = uniform_kappa_grid(16);

  FittedRule plain = doolr_fit(train, prev, base);
  ItConfig cfg;
  cfg.base = base;
  cfg.eta_grid = {0.0};
  FittedRule it = itdoolr_fit(train, ext, prev, cfg);

  CHECK(it.eta.has_value());
  CHECK(*it.eta == 0.0);
  CHECK(it.rule.intercept == plain.rule.intercept);
  CHECK(it.rule.slopes == plain.rule.slopes);
  CHECK(it.kappa_hat == plain.kappa_hat);
  CHECK(it.h == plain.h);
  for (const auto& s : train.samples)
    CHECK(it.rule.decide(s.features) == plain.rule.decide(s.features));
}
