#include "ppvrule/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace ppvrule {

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
}

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) * 0.39894228040143267793994605993438;
}

std::pair<double, double> empirical_rates(const LinearRule& rule, const Dataset& data) {
  if (data.n1 == 0 || data.n0 == 0)
    throw std::invalid_argument("empirical_rates needs at least one case and one control");
  std::size_t flagged_cases = 0, flagged_controls = 0;
  for (const auto& s : data.samples) {
    int d = rule.decide(s.features);
    if (s.label == 1)
      flagged_cases += d;
    else
      flagged_controls += d;
  }
  return {static_cast<double>(flagged_cases) / static_cast<double>(data.n1),
          static_cast<double>(flagged_controls) / static_cast<double>(data.n0)};
}

double ppv(double tpr, double fpr, const PrevalenceSpec& prev) {
  double num = prev.gamma() * tpr;
  double den = num + fpr;
  if (den <= 0.0) return 0.0;
  return num / den;
}

std::pair<double, double> smoothed_rates(const std::vector<double>& beta, const Dataset& data,
                                         double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (beta.size() != data.dim() + 1)
    throw std::invalid_argument("beta must have length p+1 (intercept first)");
  if (data.n1 == 0 || data.n0 == 0)
    throw std::invalid_argument("smoothed_rates needs both strata");
  double sum1 = 0.0, sum0 = 0.0;
  for (const auto& s : data.samples) {
    double score = beta[0];
    for (std::size_t j = 0; j < s.features.size(); ++j) score += beta[j + 1] * s.features[j];
    double v = normal_cdf(score / h);
    if (s.label == 1)
      sum1 += v;
    else
      sum0 += v;
  }
  return {sum1 / static_cast<double>(data.n1), sum0 / static_cast<double>(data.n0)};
}

double adaptive_bandwidth(const Dataset& data, const std::vector<double>& beta0, double h_min) {
  if (beta0.size() != data.dim() + 1)
    throw std::invalid_argument("beta0 must have length p+1 (intercept first)");
  double norm2 = 0.0;
  for (double b : beta0) norm2 += b * b;
  if (!(norm2 > 0.0)) throw std::invalid_argument("beta0 must not be the zero vector");
  const double norm = std::sqrt(norm2);

  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("adaptive bandwidth needs n >= 2");
  double mean = 0.0;
  std::vector<double> scores;
  scores.reserve(n);
  for (const auto& s : data.samples) {
    double v = beta0[0];
    for (std::size_t j = 0; j < s.features.size(); ++j) v += beta0[j + 1] * s.features[j];
    v /= norm;
    scores.push_back(v);
    mean += v;
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : scores) ss += (v - mean) * (v - mean);
  double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double h = std::pow(static_cast<double>(n), -1.0 / 3.0) * sd;
  return h < h_min ? h_min : h;
}

}  // namespace ppvrule
