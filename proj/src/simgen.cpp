#include "ppvrule/simgen.hpp"

#include "ppvrule/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppvrule {

namespace {

double inv_logit(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  double e = std::exp(s);
  return e / (1.0 + e);
}

constexpr double kPiecewiseQuantile = -1.9599639845400545;  // 0.025 normal quantile

}  // namespace

double piecewise_quantile() { return kPiecewiseQuantile; }

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "linear") return ScenarioKind::Linear;
  if (name == "linear-contaminated") return ScenarioKind::LinearContaminated;
  if (name == "piecewise") return ScenarioKind::Piecewise;
  if (name == "nonlinear") return ScenarioKind::Nonlinear;
  if (name == "external-1") return ScenarioKind::ExternalI;
  if (name == "external-2") return ScenarioKind::ExternalII;
  if (name == "external-3") return ScenarioKind::ExternalIII;
  if (name == "nested-case-control") return ScenarioKind::NestedCaseControl;
  throw std::invalid_argument("unknown scenario: " + name);
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Linear: return "linear";
    case ScenarioKind::LinearContaminated: return "linear-contaminated";
    case ScenarioKind::Piecewise: return "piecewise";
    case ScenarioKind::Nonlinear: return "nonlinear";
    case ScenarioKind::ExternalI: return "external-1";
    case ScenarioKind::ExternalII: return "external-2";
    case ScenarioKind::ExternalIII: return "external-3";
    case ScenarioKind::NestedCaseControl: return "nested-case-control";
  }
  throw std::invalid_argument("unknown scenario kind");
}

Dataset gen_linear(std::size_t n, bool contaminated, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.feature_names = {"x1", "x2"};
  d.samples.reserve(n + (contaminated ? (6 * n + 99) / 100 : 0));
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    double x1 = rng.normal();
    double x2 = rng.normal();
    s.features = {x1, x2};
    double p = inv_logit(-8.7 + 2.4 * x1 + 2.4 * x2);
    s.label = rng.uniform() < p ? 1 : 0;
    d.samples.push_back(std::move(s));
  }
  if (contaminated) {
    std::size_t extra = static_cast<std::size_t>(std::ceil(0.06 * static_cast<double>(n)));
    for (std::size_t i = 0; i < extra; ++i) {
      LabeledSample s;
      s.features = {6.0, 6.0};
      s.label = 0;
      d.samples.push_back(std::move(s));
    }
  }
  d.recount();
  return d;
}

Dataset gen_piecewise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.feature_names = {"x1", "x2"};
  d.samples.reserve(n);
  std::vector<std::size_t> below;  // rows under the x2 quantile
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    double x1 = rng.normal();
    double x2 = rng.normal();
    s.features = {x1, x2};
    double lin = -8.9 + 2.0 * x1 + (x2 > kPiecewiseQuantile ? 2.0 * x2 : 0.0);
    s.label = lin + rng.logistic() > 0.0 ? 1 : 0;
    if (x2 <= kPiecewiseQuantile) below.push_back(i);
    d.samples.push_back(std::move(s));
  }
  // relabel a random 0.4%-of-n subset of the low-x2 pocket as diseased
  std::size_t want = static_cast<std::size_t>(
      std::llround(0.004 * static_cast<double>(n)));
  want = std::min(want, below.size());
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t j = i + rng.below(below.size() - i);
    std::swap(below[i], below[j]);
    d.samples[below[i]].label = 1;
  }
  d.recount();
  return d;
}

namespace {

double nonlinear_signal(double x1, double x2, double x3) {
  return -8.6 + 5.0 * std::sin(x1) - 4.0 * x2 * x2 + 3.0 * std::cos(x3);
}

}  // namespace

Dataset gen_nonlinear(std::size_t n, std::uint64_t seed, bool noiseless) {
  Rng rng(seed);
  Dataset d;
  d.feature_names = {"x1", "x2", "x3"};
  d.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    LabeledSample s;
    double x1 = rng.normal();
    double x2 = rng.normal();
    double x3 = rng.normal();
    s.features = {x1, x2, x3};
    double lin = nonlinear_signal(x1, x2, x3);
    double noise = noiseless ? 0.0 : rng.logistic();
    s.label = lin + noise > 0.0 ? 1 : 0;
    d.samples.push_back(std::move(s));
  }
  d.recount();
  return d;
}

std::pair<Dataset, ExternalRule> gen_external(std::size_t n, int scenario, std::uint64_t seed) {
  double b0, b1, b2, b3;
  switch (scenario) {
    case 1: b0 = -8.6; b1 = 5.0; b2 = -4.0; b3 = 3.0; break;
    case 2: b0 = -8.6; b1 = 5.0; b2 = 0.0; b3 = 0.0; break;
    case 3: b0 = -15.0; b1 = -3.0; b2 = -1.0; b3 = -1.0; break;
    default: throw std::invalid_argument("external scenario must be 1, 2 or 3");
  }
  Dataset d = gen_nonlinear(n, seed);
  ExternalRule ext;
  ext.mode = ExternalMode::Score;
  ext.values.reserve(n);
  for (const auto& s : d.samples) {
    double x1 = s.features[0], x2 = s.features[1], x3 = s.features[2];
    ext.values.push_back(b0 + b1 * std::sin(x1) + b2 * x2 * x2 + b3 * std::cos(x3));
  }
  return {std::move(d), std::move(ext)};
}

Dataset gen_nested_cc(std::size_t n1, std::uint64_t seed) {
  if (n1 == 0) throw std::invalid_argument("n1 must be positive");
  constexpr std::size_t kCohort = 1000000;

  for (int attempt = 0; attempt < 3; ++attempt) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    std::vector<LabeledSample> cases, controls;
    controls.reserve(kCohort + kCohort / 16);
    for (std::size_t i = 0; i < kCohort; ++i) {
      LabeledSample s;
      double x1 = rng.normal();
      double x2 = rng.normal();
      s.features = {x1, x2};
      double p = inv_logit(-8.0 + 2.1 * x1 + 2.1 * x2);
      s.label = rng.uniform() < p ? 1 : 0;
      (s.label == 1 ? cases : controls).push_back(std::move(s));
    }
    std::size_t extra = static_cast<std::size_t>(std::ceil(0.06 * kCohort));
    for (std::size_t i = 0; i < extra; ++i) {
      LabeledSample s;
      s.features = {6.0, 6.0};
      s.label = 0;
      controls.push_back(std::move(s));
    }
    std::size_t n0 = 20 * n1;
    if (cases.size() < n1 || controls.size() < n0) continue;

    auto take = [&](std::vector<LabeledSample>& pool, std::size_t count) {
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
      }
      pool.resize(count);
    };
    take(cases, n1);
    take(controls, n0);

    Dataset d;
    d.feature_names = {"x1", "x2"};
    d.sampling_design = SamplingDesign::CaseControl;
    d.samples = std::move(cases);
    d.samples.insert(d.samples.end(), std::make_move_iterator(controls.begin()),
                     std::make_move_iterator(controls.end()));
    d.recount();
    return d;
  }
  throw std::runtime_error("cohort produced too few cases for the requested n1");
}

Dataset generate_scenario(const ScenarioSpec& spec, std::optional<ExternalRule>* external) {
  if (external) external->reset();
  switch (spec.kind) {
    case ScenarioKind::Linear: return gen_linear(spec.n, false, spec.seed);
    case ScenarioKind::LinearContaminated: return gen_linear(spec.n, true, spec.seed);
    case ScenarioKind::Piecewise: return gen_piecewise(spec.n, spec.seed);
    case ScenarioKind::Nonlinear: return gen_nonlinear(spec.n, spec.seed);
    case ScenarioKind::ExternalI:
    case ScenarioKind::ExternalII:
    case ScenarioKind::ExternalIII: {
      int sc = spec.kind == ScenarioKind::ExternalI ? 1
               : spec.kind == ScenarioKind::ExternalII ? 2 : 3;
      auto [d, ext] = gen_external(spec.n, sc, spec.seed);
      if (external) *external = std::move(ext);
      return std::move(d);
    }
    case ScenarioKind::NestedCaseControl: return gen_nested_cc(spec.n, spec.seed);
  }
  throw std::invalid_argument("unknown scenario kind");
}

}  // namespace ppvrule
