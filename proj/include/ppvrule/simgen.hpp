#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "ppvrule/types.hpp"

namespace ppvrule {

enum class ScenarioKind {
  Linear,
  LinearContaminated,
  Piecewise,
  Nonlinear,
  ExternalI,
  ExternalII,
  ExternalIII,
  NestedCaseControl,
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Linear;
  std::size_t n = 0;  // training rows; for NestedCaseControl the case count n1
  std::uint64_t seed = 1;
};

ScenarioKind scenario_from_name(const std::string& name);
std::string scenario_name(ScenarioKind kind);

/// Bivariate-normal biomarkers; D ~ Bernoulli(logit^{-1}(-8.7 + 2.4 x1 + 2.4 x2)),
/// prevalence near 1%. With contamination, ceil(0.06 n) extra control rows at
/// (6,6) are appended.
Dataset gen_linear(std::size_t n, bool contaminated, std::uint64_t seed);

/// D = 1{-8.9 + 2 x1 + 2 x2 1{x2 > q(.025)} + logistic noise > 0}; a random
/// 0.4%-of-n subset of the rows below the x2 quantile is relabeled diseased.
Dataset gen_piecewise(std::size_t n, std::uint64_t seed);

/// Three normal biomarkers; D = 1{-8.6 + 5 sin(x1) - 4 x2^2 + 3 cos(x3) +
/// logistic noise > 0}. noiseless is a test hook that drops the noise term.
Dataset gen_nonlinear(std::size_t n, std::uint64_t seed, bool noiseless = false);

/// Population quantile constant used by gen_piecewise.
double piecewise_quantile();

/// Nonlinear mechanism plus an external score margin (1, sin x1, x2^2, cos x3) . beta_tilde
/// for the published-model scenario (1, 2, or 3).
std::pair<Dataset, ExternalRule> gen_external(std::size_t n, int scenario, std::uint64_t seed);

/// Cohort of 10^6 under logit^{-1}(-8 + 2.1 x1 + 2.1 x2) plus 6% contaminated
/// controls, subsampled to n1 cases and 20 n1 controls (case-control design).
Dataset gen_nested_cc(std::size_t n1, std::uint64_t seed);

/// Dispatch helper used by the harness and CLI; external is filled only for
/// the External* scenarios.
Dataset generate_scenario(const ScenarioSpec& spec, std::optional<ExternalRule>* external);

}  // namespace ppvrule
