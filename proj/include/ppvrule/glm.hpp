#pragma once

#include <vector>

#include "ppvrule/types.hpp"

namespace ppvrule {

struct LogisticFit {
  double intercept = 0.0;
  std::vector<double> slopes;
  bool converged = false;
  int iterations = 0;
  double ridge = 0.0;  // stabilizer actually used

  double linear_predictor(const std::vector<double>& x) const;
  double predict_prob(const std::vector<double>& x) const;
};

/// Maximum-likelihood logistic regression via iteratively reweighted least
/// squares. The slope block carries an optional ridge penalty; when the
/// coefficient norm runs away (separation) the fit restarts with
/// ridge = max(ridge, 1e-4) and reports converged = false.
LogisticFit fit_logistic(const Dataset& data, int max_iter = 100, double tol = 1e-8,
                         double ridge = 0.0);

/// Penalized log-likelihood after each IRLS iteration of a plain fit (no
/// separation restart); step halving keeps this sequence nondecreasing.
std::vector<double> logistic_loglik_trace(const Dataset& data, int max_iter = 100,
                                          double tol = 1e-8, double ridge = 0.0);

/// Case-control sampling correction: shifts the intercept by
/// log(p1*n0 / ((1-p1)*n1)) so fitted odds match the cohort scale.
LogisticFit case_control_adjust(LogisticFit fit, std::size_t n1, std::size_t n0,
                                const PrevalenceSpec& prev);

struct ThresholdResult {
  double threshold = 0.0;  // flag iff score > threshold; may be +/-inf sentinel
  bool feasible = false;
  double tpr = 0.0;
  double fpr = 0.0;
  double ppv = 0.0;
};

/// Exhaustive scan over midpoints between consecutive distinct scores (plus
/// -inf/+inf sentinels). Among thresholds whose prevalence-weighted PPV meets
/// alpha, returns the TPR-maximizing one, ties broken by the smallest
/// threshold; when none is feasible, returns the max-PPV threshold with
/// feasible = false.
ThresholdResult ppv_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                              double alpha, const PrevalenceSpec& prev);

/// Two-step baseline: logistic fit (case-control adjusted when the design
/// says so), then a probability cutoff chosen by ppv_threshold on the
/// training data, folded into the returned linear rule's intercept.
FittedRule standard_rule(const Dataset& data, double alpha, const PrevalenceSpec& prev);

}  // namespace ppvrule
