#include "ppvrule/plugin.hpp"

#include "ppvrule/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ppvrule {

KnnRiskModel::KnnRiskModel(const Dataset& data, std::size_t k, double odds_factor)
    : k_(k), odds_factor_(odds_factor) {
  if (k < 1 || k > data.size()) throw std::invalid_argument("knn: k out of range");
  features_.reserve(data.size());
  labels_.reserve(data.size());
  for (const auto& s : data.samples) {
    features_.push_back(s.features);
    labels_.push_back(s.label);
  }
  for (const auto& f : features_) flat_.insert(flat_.end(), f.begin(), f.end());
}

KnnRiskModel::KnnRiskModel(std::vector<std::vector<double>> features, std::vector<int> labels,
                           std::size_t k, double odds_factor)
    : features_(std::move(features)), labels_(std::move(labels)), k_(k),
      odds_factor_(odds_factor) {
  if (features_.size() != labels_.size()) throw std::invalid_argument("knn: size mismatch");
  if (k < 1 || k > features_.size()) throw std::invalid_argument("knn: k out of range");
  for (const auto& f : features_) flat_.insert(flat_.end(), f.begin(), f.end());
}

namespace {

double smoothed_count_prob(std::size_t count, std::size_t k, double odds_factor) {
  double p = (static_cast<double>(count) + 0.5) / (static_cast<double>(k) + 1.0);
  if (odds_factor != 1.0) {
    double odds = odds_factor * p / (1.0 - p);
    p = odds / (1.0 + odds);
  }
  return clamp_prob(p);
}

}  // namespace

double KnnRiskModel::prob_from_neighbors(const double* x, std::size_t dim,
                                         std::size_t skip) const {
  const std::size_t n = features_.size();
  // (distance^2, row index); ties resolve by index through pair ordering
  thread_local std::vector<std::pair<double, std::size_t>> d;
  d.clear();
  d.reserve(n);
  const double* row = flat_.data();
  for (std::size_t i = 0; i < n; ++i, row += dim) {
    if (i == skip) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      double diff = x[j] - row[j];
      s += diff * diff;
    }
    d.emplace_back(s, i);
  }
  std::size_t kk = std::min(k_, d.size());
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk - 1), d.end());
  std::size_t count = 0;
  for (std::size_t i = 0; i < kk; ++i) count += static_cast<std::size_t>(labels_[d[i].second]);
  return smoothed_count_prob(count, kk, odds_factor_);
}

double KnnRiskModel::predict_prob(const std::vector<double>& x) const {
  if (!features_.empty() && x.size() != features_[0].size())
    throw std::invalid_argument("knn: feature dimension mismatch");
  return prob_from_neighbors(x.data(), x.size(), features_.size());
}

double KnnRiskModel::loo_predict_prob(std::size_t row) const {
  if (row >= features_.size()) throw std::invalid_argument("knn: row out of range");
  return prob_from_neighbors(features_[row].data(), features_[row].size(), row);
}

double plugin_decision_value(const std::vector<double>& x, const RiskModel& risk, double lambda,
                             double alpha, const PrevalenceSpec& prev) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  double e1 = risk.eta1(x, prev);
  double e0 = risk.eta0(x, prev);
  return e1 * (1.0 + lambda * prev.gamma() * (1.0 - alpha)) - lambda * alpha * e0;
}

std::size_t default_knn_k(std::size_t n) {
  double k = std::ceil(std::pow(static_cast<double>(n), 2.0 / 3.0) / 2.0);
  std::size_t kk = static_cast<std::size_t>(k);
  if (kk < 1) kk = 1;
  if (kk > n) kk = n;
  return kk;
}

std::shared_ptr<RiskModel> knn_risk(const Dataset& data, std::size_t k) {
  return std::make_shared<KnnRiskModel>(data, k);
}

namespace {

LambdaSolve lambda_from_scores(const std::vector<double>& lr, const std::vector<int>& labels,
                               double alpha, const PrevalenceSpec& prev) {
  ThresholdResult th = ppv_threshold(lr, labels, alpha, prev);
  LambdaSolve out;
  out.lr_threshold = th.threshold;
  out.feasible = th.feasible;
  double t = th.threshold;
  double reach = alpha / (prev.gamma() * (1.0 - alpha));  // sup of t(lambda) over lambda >= 0
  if (t <= 0.0) {
    out.lambda_hat = 0.0;  // unconstrained rule (flag everyone) already feasible
  } else if (t < reach) {
    out.lambda_hat = t / (alpha - t * prev.gamma() * (1.0 - alpha));
  } else {
    // the selected cut lies beyond what finite lambda can express
    out.lambda_hat = std::numeric_limits<double>::infinity();
  }
  return out;
}

}  // namespace

LambdaSolve solve_lambda(const RiskModel& risk, const Dataset& data, double alpha,
                         const PrevalenceSpec& prev) {
  if (data.samples.empty()) throw std::invalid_argument("solve_lambda: empty data");
  const std::size_t n = data.size();
  std::vector<double> lr(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = data.samples[i];
    lr[i] = risk.eta1(s.features, prev) / risk.eta0(s.features, prev);
    labels[i] = s.label;
  }
  return lambda_from_scores(lr, labels, alpha, prev);
}

double PluginRule::likelihood_ratio(const std::vector<double>& x) const {
  PrevalenceSpec prev(p1);
  return risk->eta1(x, prev) / risk->eta0(x, prev);
}

PluginRule plugin_fit(const Dataset& data, PluginEstimator estimator, double alpha,
                      const PrevalenceSpec& prev, std::size_t knn_k) {
  std::shared_ptr<RiskModel> risk;
  if (estimator == PluginEstimator::Logistic) {
    LogisticFit fit = fit_logistic(data);
    if (data.sampling_design == SamplingDesign::CaseControl)
      fit = case_control_adjust(fit, data.n1, data.n0, prev);
    risk = std::make_shared<LogisticRiskModel>(std::move(fit));
  } else {
    std::size_t k = knn_k == 0 ? default_knn_k(data.size()) : knn_k;
    double odds_factor = 1.0;
    if (data.sampling_design == SamplingDesign::CaseControl) {
      // cohort odds = case-control odds * (n0/n1) * p1/(1-p1)
      odds_factor = (static_cast<double>(data.n0) / static_cast<double>(data.n1)) * prev.gamma();
    }
    risk = std::make_shared<KnnRiskModel>(data, k, odds_factor);
  }

  LambdaSolve sol;
  if (estimator == PluginEstimator::Knn) {
    // calibrate the cut on leave-one-out scores; with few cases the row's own
    // label otherwise inflates its neighborhood estimate and the chosen
    // threshold lands far above the honest constraint boundary
    const auto& km = static_cast<const KnnRiskModel&>(*risk);
    const std::size_t n = data.size();
    std::vector<double> lr(n);
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      double p = km.loo_predict_prob(i);
      lr[i] = (p / prev.p1) / ((1.0 - p) / prev.p0());
      labels[i] = data.samples[i].label;
    }
    sol = lambda_from_scores(lr, labels, alpha, prev);
  } else {
    sol = solve_lambda(*risk, data, alpha, prev);
  }

  PluginRule rule;
  rule.risk = risk;
  rule.lambda_hat = sol.lambda_hat;
  rule.lr_threshold = sol.lr_threshold;
  rule.alpha = alpha;
  rule.p1 = prev.p1;
  rule.feasible = sol.feasible;

  std::size_t fc = 0, ff = 0;
  for (const auto& s : data.samples) {
    int d = rule.decide(s.features);
    if (s.label == 1)
      fc += d;
    else
      ff += d;
  }
  double tpr = static_cast<double>(fc) / static_cast<double>(data.n1);
  double fpr = static_cast<double>(ff) / static_cast<double>(data.n0);
  rule.train_metrics = {tpr, fpr, ppv(tpr, fpr, prev)};
  return rule;
}

}  // namespace ppvrule
