#include "ppvrule/itdoolr.hpp"

#include "ppvrule/metrics.hpp"
#include "ppvrule/rng.hpp"
#include "fit_detail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ppvrule {

namespace {

void check_external(const Dataset& data, const ExternalRule& external) {
  if (external.values.size() != data.size())
    throw std::invalid_argument("external signal count does not match dataset");
  external.validate();
}

double case_score(const std::vector<double>& beta, const LabeledSample& s) {
  double v = beta[0];
  for (std::size_t j = 0; j < s.features.size(); ++j) v += beta[j + 1] * s.features[j];
  return v;
}

}  // namespace

double penalty(const std::vector<double>& beta, const Dataset& data, const ExternalRule& external,
               double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (beta.size() != data.dim() + 1) throw std::invalid_argument("beta must have length p+1");
  check_external(data, external);
  if (data.n1 == 0) throw std::invalid_argument("penalty needs at least one case");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    if (s.label != 1) continue;
    sum += normal_cdf(-case_score(beta, s) * external.values[i] / h);
  }
  return sum / static_cast<double>(data.n1);
}

double itdoolr_objective(const std::vector<double>& beta, const Dataset& data,
                         const ExternalRule& external, double kappa, double eta, double alpha,
                         const PrevalenceSpec& prev, double h) {
  double base = doolr_objective(beta, data, kappa, alpha, prev, h);
  if (eta == 0.0) return base;
  return base - eta * penalty(beta, data, external, h);
}

std::vector<double> itdoolr_gradient(const std::vector<double>& beta, const Dataset& data,
                                     const ExternalRule& external, double kappa, double eta,
                                     double alpha, const PrevalenceSpec& prev, double h) {
  std::vector<double> grad = doolr_gradient(beta, data, kappa, alpha, prev, h);
  if (eta == 0.0) return grad;
  check_external(data, external);
  const double inv_h = 1.0 / h;
  const double inv_n1 = 1.0 / static_cast<double>(data.n1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    if (s.label != 1) continue;
    double g = external.values[i];
    double z = -case_score(beta, s) * g * inv_h;
    // d/dbeta of -eta*Phi(z) = eta * pdf(z) * g / h * X
    double coef = eta * inv_n1 * normal_pdf(z) * g * inv_h;
    grad[0] += coef;
    for (std::size_t j = 0; j < s.features.size(); ++j) grad[j + 1] += coef * s.features[j];
  }
  return grad;
}

double select_eta(const Dataset& data, const ExternalRule& external, const PrevalenceSpec& prev,
                  const ItConfig& config) {
  if (config.eta_grid.empty()) throw std::invalid_argument("eta grid must be nonempty");
  if (std::find(config.eta_grid.begin(), config.eta_grid.end(), 0.0) == config.eta_grid.end())
    throw std::invalid_argument("eta grid must contain 0");
  for (double e : config.eta_grid)
    if (e < 0.0) throw std::invalid_argument("eta must be nonnegative");
  check_external(data, external);
  if (config.eta_grid.size() == 1) return 0.0;

  const std::size_t folds = static_cast<std::size_t>(config.cv_folds);
  if (folds < 2) throw std::invalid_argument("cv_folds must be at least 2");
  if (data.n1 < folds || data.n0 < folds)
    throw std::invalid_argument("a cross-validation fold would have an empty stratum; "
                                "reduce cv_folds");

  // stratified fold assignment over the canonical row order, shuffled by seed
  auto order = detail::canonical_order(data);
  std::vector<std::size_t> case_rows, control_rows;
  for (std::size_t i : order)
    (data.samples[i].label == 1 ? case_rows : control_rows).push_back(i);
  Rng rng(derive_seed(config.base.seed, 0xF01DULL));
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.below(i)]);
  };
  shuffle(case_rows);
  shuffle(control_rows);
  std::vector<std::size_t> fold_of(data.size(), 0);
  for (std::size_t i = 0; i < case_rows.size(); ++i) fold_of[case_rows[i]] = i % folds;
  for (std::size_t i = 0; i < control_rows.size(); ++i) fold_of[control_rows[i]] = i % folds;

  struct Split {
    Dataset train, test;
    ExternalRule train_ext;
  };
  std::vector<Split> splits(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    auto& sp = splits[f];
    sp.train.feature_names = sp.test.feature_names = data.feature_names;
    sp.train.sampling_design = sp.test.sampling_design = data.sampling_design;
    sp.train_ext.mode = external.mode;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (fold_of[i] == f) {
        sp.test.samples.push_back(data.samples[i]);
      } else {
        sp.train.samples.push_back(data.samples[i]);
        sp.train_ext.values.push_back(external.values[i]);
      }
    }
    sp.train.recount();
    sp.test.recount();
  }

  std::vector<double> etas = config.eta_grid;
  std::sort(etas.begin(), etas.end());  // ties below resolve to the smaller eta

  double best_eta = 0.0, best_tpr = -1.0;
  bool any_feasible = false;
  for (double eta : etas) {
    double mean_tpr = 0.0, mean_ppv = 0.0;
    for (std::size_t f = 0; f < folds; ++f) {
      DoolrConfig cfg = config.base;
      cfg.seed = derive_seed(config.base.seed, 0xCF00ULL + f);
      FittedRule r = detail::fit_linear_rule(splits[f].train, &splits[f].train_ext, eta, prev, cfg);
      auto [tpr, fpr] = empirical_rates(r.rule, splits[f].test);
      mean_tpr += tpr;
      mean_ppv += ppv(tpr, fpr, prev);
    }
    mean_tpr /= static_cast<double>(folds);
    mean_ppv /= static_cast<double>(folds);
    if (mean_ppv >= config.base.alpha - config.cv_ppv_slack) {
      any_feasible = true;
      if (mean_tpr > best_tpr) {  // ties keep the smaller (earlier) eta
        best_tpr = mean_tpr;
        best_eta = eta;
      }
    }
  }
  return any_feasible ? best_eta : 0.0;
}

FittedRule itdoolr_fit(const Dataset& data, const ExternalRule& external,
                       const PrevalenceSpec& prev, const ItConfig& config) {
  check_external(data, external);
  double eta = select_eta(data, external, prev, config);
  FittedRule out = detail::fit_linear_rule(data, &external, eta, prev, config.base);
  out.eta = eta;
  return out;
}

}  // namespace ppvrule
