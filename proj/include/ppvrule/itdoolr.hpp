#pragma once

#include <vector>

#include "ppvrule/doolr.hpp"
#include "ppvrule/types.hpp"

namespace ppvrule {

/// Configuration of the external-information variant. eta weighs the
/// disagreement penalty; it is chosen by stratified cross-validation.
struct ItConfig {
  DoolrConfig base;
  std::vector<double> eta_grid = {0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  int cv_folds = 5;
  double cv_ppv_slack = 0.005;
};

/// Mean over cases of Phi(-score * signal / h): the smoothed fraction of
/// diseased subjects on which the linear rule contradicts the external rule.
double penalty(const std::vector<double>& beta, const Dataset& data, const ExternalRule& external,
               double h);

/// doolr_objective minus eta times the disagreement penalty.
double itdoolr_objective(const std::vector<double>& beta, const Dataset& data,
                         const ExternalRule& external, double kappa, double eta, double alpha,
                         const PrevalenceSpec& prev, double h);

std::vector<double> itdoolr_gradient(const std::vector<double>& beta, const Dataset& data,
                                     const ExternalRule& external, double kappa, double eta,
                                     double alpha, const PrevalenceSpec& prev, double h);

/// Stratified K-fold selection of eta: the largest-TPR value whose mean
/// held-out PPV stays within cv_ppv_slack of alpha; falls back to 0 when no
/// value qualifies (ties go to the smaller eta).
double select_eta(const Dataset& data, const ExternalRule& external, const PrevalenceSpec& prev,
                  const ItConfig& config);

/// Cross-validated eta selection followed by a full constrained fit at the
/// chosen eta on all training data.
FittedRule itdoolr_fit(const Dataset& data, const ExternalRule& external,
                       const PrevalenceSpec& prev, const ItConfig& config);

}  // namespace ppvrule
