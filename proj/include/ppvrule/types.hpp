#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ppvrule {

enum class SamplingDesign { Cohort, CaseControl };

/// One observation: biomarker/covariate vector, binary disease status, and
/// (when an external risk model is in play) the signal that model assigns.
struct LabeledSample {
  std::vector<double> features;
  int label = 0;  // D in {0,1}
  std::optional<double> external_signal;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<std::string> feature_names;
  SamplingDesign sampling_design = SamplingDesign::Cohort;
  std::size_t n1 = 0;  // cases
  std::size_t n0 = 0;  // controls

  std::size_t size() const { return samples.size(); }
  std::size_t dim() const { return feature_names.size(); }

  /// Recomputes n1/n0 and validates shared feature length and finite values.
  void recount();
};

Dataset make_dataset(std::vector<LabeledSample> samples,
                     std::vector<std::string> feature_names,
                     SamplingDesign design = SamplingDesign::Cohort);

/// Declared disease prevalence p1 with the odds gamma = p1/(1-p1).
struct PrevalenceSpec {
  double p1;

  explicit PrevalenceSpec(double p) : p1(p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prevalence must lie in (0,1)");
  }
  double p0() const { return 1.0 - p1; }
  double gamma() const { return p1 / (1.0 - p1); }
};

/// Per-feature (mean, sd) transform under which coefficients were fit, so a
/// persisted rule can be applied to raw-unit inputs.
struct FeatureScaling {
  std::vector<double> mean;
  std::vector<double> sd;
};

/// Linear decision rule: flag iff intercept + x' * slopes > 0, where x' is x
/// after the stored standardization (when present).
struct LinearRule {
  double intercept = 0.0;
  std::vector<double> slopes;
  std::optional<FeatureScaling> standardization;

  double score(const std::vector<double>& x) const;
  int decide(const std::vector<double>& x) const { return score(x) > 0.0 ? 1 : 0; }
};

struct RuleMetrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double ppv = 0.0;
};

/// A fitted linear rule plus the selection metadata of the constrained fit.
struct FittedRule {
  LinearRule rule;
  double kappa_hat = 0.0;
  double lambda_hat = 0.0;
  double h = 0.0;
  double alpha = 0.0;
  RuleMetrics train_metrics;
  std::optional<double> eta;  // external-information penalty weight, when used
  bool feasible = true;
};

inline double clamp_prob(double p) {
  const double lo = 1e-12;
  if (!(p > lo)) return lo;
  if (!(p < 1.0 - lo)) return 1.0 - lo;
  return p;
}

/// Estimated disease-probability model. predict_prob is clamped away from
/// {0,1}; eta1/eta0 are the prevalence-standardized densities ratios used by
/// the plug-in rule.
class RiskModel {
 public:
  virtual ~RiskModel() = default;
  virtual double predict_prob(const std::vector<double>& x) const = 0;

  double eta1(const std::vector<double>& x, const PrevalenceSpec& prev) const {
    return clamp_prob(predict_prob(x)) / prev.p1;
  }
  double eta0(const std::vector<double>& x, const PrevalenceSpec& prev) const {
    return (1.0 - clamp_prob(predict_prob(x))) / prev.p0();
  }
};

enum class ExternalMode { Score, Decision };

/// Per-sample signal from a published risk rule. Score mode carries the signed
/// margin of the external score against its clinical threshold; Decision mode
/// carries only +1 (screen) / -1 (do not screen).
struct ExternalRule {
  ExternalMode mode = ExternalMode::Score;
  std::vector<double> values;

  double signal(std::size_t i) const { return values.at(i); }

  /// Collapses margins to their +/-1 decisions (Decision-mode view).
  ExternalRule as_decision() const;

  void validate() const;
};

}  // namespace ppvrule
