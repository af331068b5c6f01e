#pragma once

#include <cstdint>
#include <vector>

#include "ppvrule/metrics.hpp"
#include "ppvrule/types.hpp"

namespace ppvrule {

/// Configuration of the direct linear-rule optimization.
struct DoolrConfig {
  double alpha = 0.04;
  std::vector<double> kappa_grid;  // empty -> uniform_kappa_grid(101)
  int restarts = 5;
  int max_iter = 200;
  double grad_tol = 1e-6;
  double feasibility_tol = 1e-3;
  // bisection rounds inserted between the last infeasible and the selected
  // feasible grid point; sharpens the root of PPV(kappa) - alpha, which a
  // uniform grid resolves poorly at rare-disease prevalences
  int refine_rounds = 12;
  SmoothingSpec smoothing;
  std::uint64_t seed = 1;
  bool standardize = true;
};

/// n_points uniform values on [0, hi]; kappa = lambda/(1+lambda), so hi=0.995
/// caps lambda at 199 and keeps the TPR term alive.
std::vector<double> uniform_kappa_grid(std::size_t n_points = 101, double hi = 0.995);

/// Surrogate Lagrangian, rescaled by 1/(1+lambda):
/// (1 - kappa + kappa*gamma*(1-alpha)) * TPR_Phi(beta) - kappa*alpha * FPR_Phi(beta).
double doolr_objective(const std::vector<double>& beta, const Dataset& data, double kappa,
                       double alpha, const PrevalenceSpec& prev, double h);

/// Exact gradient of doolr_objective (length p+1, intercept first).
std::vector<double> doolr_gradient(const std::vector<double>& beta, const Dataset& data,
                                   double kappa, double alpha, const PrevalenceSpec& prev,
                                   double h);

/// Quasi-Newton ascent of the kappa-weighted objective from init plus
/// (restarts-1) Gaussian perturbations of init; returns the best candidate.
/// Bandwidth resolves from config.smoothing (adaptive choice uses init).
std::vector<double> maximize_for_kappa(const Dataset& data, double kappa,
                                       const DoolrConfig& config, const PrevalenceSpec& prev,
                                       const std::vector<double>& init);

/// Full constrained fit: logistic initializer, bandwidth, warm-started kappa
/// grid search with each candidate's cut re-solved at the constraint
/// boundary, feasibility-first selection, unit-norm projection.
FittedRule doolr_fit(const Dataset& data, const PrevalenceSpec& prev, const DoolrConfig& config);

}  // namespace ppvrule
