#include "ppvrule/types.hpp"

#include <cmath>

namespace ppvrule {

void Dataset::recount() {
  n1 = 0;
  n0 = 0;
  const std::size_t p = feature_names.size();
  for (const auto& s : samples) {
    if (s.features.size() != p)
      throw std::invalid_argument("sample feature length does not match feature_names");
    for (double v : s.features)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
    if (s.label != 0 && s.label != 1) throw std::invalid_argument("label must be 0 or 1");
    if (s.label == 1)
      ++n1;
    else
      ++n0;
  }
}

Dataset make_dataset(std::vector<LabeledSample> samples,
                     std::vector<std::string> feature_names,
                     SamplingDesign design) {
  Dataset d;
  d.samples = std::move(samples);
  d.feature_names = std::move(feature_names);
  d.sampling_design = design;
  if (d.feature_names.empty()) throw std::invalid_argument("dataset needs at least one feature");
  d.recount();
  return d;
}

double LinearRule::score(const std::vector<double>& x) const {
  if (x.size() != slopes.size()) throw std::invalid_argument("feature dimension mismatch");
  double s = intercept;
  if (standardization) {
    const auto& sc = *standardization;
    for (std::size_t j = 0; j < slopes.size(); ++j)
      s += slopes[j] * (x[j] - sc.mean[j]) / sc.sd[j];
  } else {
    for (std::size_t j = 0; j < slopes.size(); ++j) s += slopes[j] * x[j];
  }
  return s;
}

ExternalRule ExternalRule::as_decision() const {
  ExternalRule out;
  out.mode = ExternalMode::Decision;
  out.values.reserve(values.size());
  for (double v : values) out.values.push_back(v > 0.0 ? 1.0 : -1.0);
  return out;
}

void ExternalRule::validate() const {
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite external signal");
    if (mode == ExternalMode::Decision && v != 1.0 && v != -1.0)
      throw std::invalid_argument("decision-mode external signals must be +1 or -1");
  }
}

}  // namespace ppvrule
