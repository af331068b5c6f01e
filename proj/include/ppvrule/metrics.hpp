#pragma once

#include <utility>
#include <vector>

#include "ppvrule/types.hpp"

namespace ppvrule {

/// Bandwidth policy for the normal-CDF surrogate of the zero-one indicator.
struct SmoothingSpec {
  enum class Method { Adaptive, Fixed };
  Method method = Method::Adaptive;
  double fixed_h = 0.1;   // used when method == Fixed
  double h_min = 1e-4;    // lower clamp for degenerate score spreads
};

/// Standard normal distribution function, |error| <= 1e-12.
double normal_cdf(double x);

/// Standard normal density.
double normal_pdf(double x);

/// Hard-indicator (TPR, FPR) of a rule over the case/control strata.
std::pair<double, double> empirical_rates(const LinearRule& rule, const Dataset& data);

/// Prevalence-weighted PPV: gamma*tpr / (gamma*tpr + fpr); 0 when the rule
/// flags nobody (never NaN).
double ppv(double tpr, double fpr, const PrevalenceSpec& prev);

/// Surrogate (TPR, FPR): per-stratum means of Phi((b0 + x.b1)/h). beta packs
/// the intercept first, then one slope per feature, applied to the raw
/// feature values of `data`.
std::pair<double, double> smoothed_rates(const std::vector<double>& beta, const Dataset& data,
                                         double h);

/// h = n^{-1/3} * sd of the normalized scores (1,x)'beta0 / ||beta0|| over all
/// n samples (n-1 divisor), clamped below at h_min.
double adaptive_bandwidth(const Dataset& data, const std::vector<double>& beta0,
                          double h_min = 1e-4);

}  // namespace ppvrule
