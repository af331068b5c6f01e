#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ppvrule/glm.hpp"
#include "ppvrule/types.hpp"

namespace ppvrule {

class LogisticRiskModel : public RiskModel {
 public:
  explicit LogisticRiskModel(LogisticFit fit) : fit_(std::move(fit)) {}
  double predict_prob(const std::vector<double>& x) const override {
    return fit_.predict_prob(x);
  }
  const LogisticFit& fit() const { return fit_; }

 private:
  LogisticFit fit_;
};

/// k-nearest-neighbor disease-probability estimate with (count+0.5)/(k+1)
/// smoothing; distance ties break by training row index. odds_factor rescales
/// the fitted odds (used for the case-control sampling correction).
class KnnRiskModel : public RiskModel {
 public:
  KnnRiskModel(const Dataset& data, std::size_t k, double odds_factor = 1.0);
  KnnRiskModel(std::vector<std::vector<double>> features, std::vector<int> labels, std::size_t k,
               double odds_factor = 1.0);
  double predict_prob(const std::vector<double>& x) const override;

  /// Probability for training row `row` with the row itself excluded from its
  /// neighborhood; used to calibrate the lambda cut on honest scores.
  double loo_predict_prob(std::size_t row) const;

  std::size_t k() const { return k_; }
  double odds_factor() const { return odds_factor_; }
  const std::vector<std::vector<double>>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  double prob_from_neighbors(const double* x, std::size_t dim, std::size_t skip) const;

  std::vector<std::vector<double>> features_;
  std::vector<double> flat_;  // row-major copy for the distance scans
  std::vector<int> labels_;
  std::size_t k_;
  double odds_factor_;
};

/// Decision score of the theoretical optimal rule at multiplier lambda:
/// eta1(x)*(1 + lambda*gamma*(1-alpha)) - lambda*alpha*eta0(x); flag iff > 0.
double plugin_decision_value(const std::vector<double>& x, const RiskModel& risk, double lambda,
                             double alpha, const PrevalenceSpec& prev);

struct LambdaSolve {
  double lambda_hat = 0.0;   // +inf when the selected cut exceeds the lambda-reachable range
  double lr_threshold = 0.0; // flag iff eta1/eta0 > lr_threshold
  bool feasible = false;
};

/// Solves the constraint equation for lambda by an exact rank scan: the rule
/// thresholds the likelihood-ratio score eta1/eta0, so the scan of
/// ppv_threshold on those scores picks the cut, which maps back to lambda via
/// lambda = t / (alpha - t*gamma*(1-alpha)).
LambdaSolve solve_lambda(const RiskModel& risk, const Dataset& data, double alpha,
                         const PrevalenceSpec& prev);

/// Default neighborhood size: ceil(n^{2/3} / 2).
std::size_t default_knn_k(std::size_t n);

std::shared_ptr<RiskModel> knn_risk(const Dataset& data, std::size_t k);

enum class PluginEstimator { Logistic, Knn };

struct PluginRule {
  std::shared_ptr<const RiskModel> risk;
  double lambda_hat = 0.0;
  double lr_threshold = 0.0;
  double alpha = 0.0;
  double p1 = 0.0;
  bool feasible = true;
  RuleMetrics train_metrics;

  double likelihood_ratio(const std::vector<double>& x) const;
  int decide(const std::vector<double>& x) const {
    return likelihood_ratio(x) > lr_threshold ? 1 : 0;
  }
};

/// Fits the risk model (Remark-style sampling correction under case-control
/// design), solves for lambda, and packages the plug-in rule with training
/// metrics. knn_k = 0 selects the default k.
PluginRule plugin_fit(const Dataset& data, PluginEstimator estimator, double alpha,
                      const PrevalenceSpec& prev, std::size_t knn_k = 0);

}  // namespace ppvrule
