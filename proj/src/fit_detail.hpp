#pragma once

// Shared internals of the smoothed constrained linear-rule fits. Everything
// here operates on flat row-major design matrices with a leading intercept
// column, in canonical row order (cases before controls, rows sorted by
// feature values) so results do not depend on the caller's sample order.

#include <cstdint>
#include <optional>
#include <vector>

#include "ppvrule/doolr.hpp"
#include "ppvrule/types.hpp"

namespace ppvrule::detail {

struct LinearProblem {
  std::size_t dim = 0;                 // p+1
  std::vector<double> cases;           // n1 x dim
  std::vector<double> controls;        // n0 x dim
  std::vector<double> case_signals;    // external signal per case row (may be empty)
  std::optional<FeatureScaling> scaling;
  double gamma = 0.0;
  double alpha = 0.0;

  std::size_t n1() const { return dim ? cases.size() / dim : 0; }
  std::size_t n0() const { return dim ? controls.size() / dim : 0; }
};

/// Canonical permutation of a dataset: cases first, then controls, each block
/// sorted lexicographically by features (stable).
std::vector<std::size_t> canonical_order(const Dataset& data);

/// Builds the flat problem; when standardize is set, features are centered
/// and scaled by their full-sample mean/sd and the transform is recorded.
LinearProblem build_problem(const Dataset& data, const ExternalRule* external,
                            const PrevalenceSpec& prev, double alpha, bool standardize);

/// Smoothed objective at (kappa, eta): weighted surrogate TPR/FPR minus the
/// external-disagreement penalty. eta == 0 takes exactly the penalty-free path.
double smooth_objective(const LinearProblem& prob, const double* beta, double kappa, double eta,
                        double h);

/// Writes the gradient into grad (length dim) and returns the objective.
double smooth_objective_gradient(const LinearProblem& prob, const double* beta, double kappa,
                                 double eta, double h, double* grad);

struct OptimizerResult {
  std::vector<double> beta;
  double objective = 0.0;
};

/// BFGS ascent with Armijo backtracking from init plus (restarts-1) Gaussian
/// perturbations (sd = 0.25*||init||); rng_tag keeps restart noise
/// reproducible per grid point.
OptimizerResult maximize_smooth(const LinearProblem& prob, double kappa, double eta, double h,
                                const std::vector<double>& init, int restarts, int max_iter,
                                double grad_tol, std::uint64_t seed, std::uint64_t rng_tag);

/// Complete fit shared by the plain and the external-information variants.
FittedRule fit_linear_rule(const Dataset& data, const ExternalRule* external, double eta,
                           const PrevalenceSpec& prev, const DoolrConfig& config);

}  // namespace ppvrule::detail
