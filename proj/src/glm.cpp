#include "ppvrule/glm.hpp"

#include "ppvrule/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ppvrule {

namespace {

double sigmoid(double s) {
  if (s >= 0.0) {
    double e = std::exp(-s);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(s);
  return e / (1.0 + e);
}

// log(1 + e^s) without overflow
double log1pexp(double s) {
  if (s > 35.0) return s;
  if (s < -35.0) return std::exp(s);
  return std::log1p(std::exp(s));
}

// Solves A x = b in place for a small dense SPD matrix (Cholesky).
std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) {
    double d = a[j * m + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * m + k] * a[j * m + k];
    if (!(d > 1e-300)) throw std::runtime_error("singular weighted design matrix");
    d = std::sqrt(d);
    a[j * m + j] = d;
    for (std::size_t i = j + 1; i < m; ++i) {
      double v = a[i * m + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * m + k] * a[j * m + k];
      a[i * m + j] = v / d;
    }
  }
  // forward then backward substitution
  for (std::size_t i = 0; i < m; ++i) {
    double v = b[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * m + k] * b[k];
    b[i] = v / a[i * m + i];
  }
  for (std::size_t ii = m; ii-- > 0;) {
    double v = b[ii];
    for (std::size_t k = ii + 1; k < m; ++k) v -= a[k * m + ii] * b[k];
    b[ii] = v / a[ii * m + ii];
  }
  return b;
}

struct IrlsResult {
  std::vector<double> beta;  // intercept first
  bool converged = false;
  bool separation = false;
  int iterations = 0;
};

// Penalized log-likelihood: sum_i [y_i s_i - log(1+e^{s_i})] - (ridge/2)||beta_1||^2
double penalized_loglik(const Dataset& data, const std::vector<double>& beta, double ridge) {
  double ll = 0.0;
  for (const auto& s : data.samples) {
    double lp = beta[0];
    for (std::size_t j = 0; j < s.features.size(); ++j) lp += beta[j + 1] * s.features[j];
    ll += (s.label == 1 ? lp : 0.0) - log1pexp(lp);
  }
  double pen = 0.0;
  for (std::size_t j = 1; j < beta.size(); ++j) pen += beta[j] * beta[j];
  return ll - 0.5 * ridge * pen;
}

IrlsResult irls(const Dataset& data, int max_iter, double tol, double ridge,
                std::vector<double>* trace = nullptr) {
  const std::size_t m = data.dim() + 1;
  const std::size_t n = data.size();
  IrlsResult out;
  out.beta.assign(m, 0.0);
  // start the intercept at the empirical logit
  double pbar = static_cast<double>(data.n1) / static_cast<double>(n);
  pbar = std::min(std::max(pbar, 1e-9), 1.0 - 1e-9);
  out.beta[0] = std::log(pbar / (1.0 - pbar));

  double ll = penalized_loglik(data, out.beta, ridge);
  std::vector<double> grad(m), hess(m * m), lp(n);

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = data.samples[i];
      double v = out.beta[0];
      for (std::size_t j = 0; j < s.features.size(); ++j) v += out.beta[j + 1] * s.features[j];
      lp[i] = v;
      double p = sigmoid(v);
      double r = static_cast<double>(s.label) - p;
      double w = std::max(p * (1.0 - p), 1e-12);
      grad[0] += r;
      hess[0] += w;
      for (std::size_t j = 0; j < s.features.size(); ++j) {
        double xj = s.features[j];
        grad[j + 1] += r * xj;
        hess[(j + 1) * m] += w * xj;  // column 0 of row j+1
        for (std::size_t k = 0; k <= j; ++k)
          hess[(j + 1) * m + (k + 1)] += w * xj * s.features[k];
      }
    }
    // ridge acts on slopes only
    for (std::size_t j = 1; j < m; ++j) {
      grad[j] -= ridge * out.beta[j];
      hess[j * m + j] += ridge;
    }
    // mirror the lower triangle
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = i + 1; k < m; ++k) hess[i * m + k] = hess[k * m + i];

    std::vector<double> step = solve_spd(hess, grad, m);

    // step halving keeps the penalized log-likelihood nondecreasing
    double scale = 1.0;
    std::vector<double> cand(m);
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 40; ++half) {
      for (std::size_t j = 0; j < m; ++j) cand[j] = out.beta[j] + scale * step[j];
      ll_new = penalized_loglik(data, cand, ridge);
      if (ll_new >= ll - 1e-12) break;
      scale *= 0.5;
    }
    double max_change = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      max_change = std::max(max_change, std::abs(cand[j] - out.beta[j]));
    out.beta = cand;
    ll = ll_new;
    if (trace) trace->push_back(ll);

    double norm2 = 0.0;
    for (double b : out.beta) norm2 += b * b;
    if (norm2 > 1e6) {  // ||beta|| > 1e3: separation
      out.separation = true;
      return out;
    }
    if (max_change < tol) {
      out.converged = true;
      return out;
    }
  }
  return out;
}

}  // namespace

double LogisticFit::linear_predictor(const std::vector<double>& x) const {
  if (x.size() != slopes.size()) throw std::invalid_argument("feature dimension mismatch");
  double v = intercept;
  for (std::size_t j = 0; j < slopes.size(); ++j) v += slopes[j] * x[j];
  return v;
}

double LogisticFit::predict_prob(const std::vector<double>& x) const {
  return clamp_prob(sigmoid(linear_predictor(x)));
}

LogisticFit fit_logistic(const Dataset& data, int max_iter, double tol, double ridge) {
  if (data.n1 < 1 || data.n0 < 1)
    throw std::invalid_argument("fit_logistic needs at least one case and one control");
  if (data.dim() < 1) throw std::invalid_argument("fit_logistic needs p >= 1");
  if (ridge < 0.0) throw std::invalid_argument("ridge must be nonnegative");

  IrlsResult r = irls(data, max_iter, tol, ridge);
  if (!r.converged && !r.separation) {
    // the norm guard misses slow saturation; declare separation when the
    // fitted direction already splits the strata perfectly
    double min_case = std::numeric_limits<double>::infinity();
    double max_ctrl = -std::numeric_limits<double>::infinity();
    for (const auto& s : data.samples) {
      double lp = r.beta[0];
      for (std::size_t j = 0; j < s.features.size(); ++j) lp += r.beta[j + 1] * s.features[j];
      if (s.label == 1)
        min_case = std::min(min_case, lp);
      else
        max_ctrl = std::max(max_ctrl, lp);
    }
    if (min_case >= max_ctrl) r.separation = true;
  }
  bool hit_separation = false;
  double used_ridge = ridge;
  if (r.separation) {
    hit_separation = true;
    used_ridge = std::max(ridge, 1e-4);
    r = irls(data, max_iter, tol, used_ridge);
    if (r.separation) throw std::runtime_error("logistic fit diverged despite ridge escalation");
  }

  LogisticFit fit;
  fit.intercept = r.beta[0];
  fit.slopes.assign(r.beta.begin() + 1, r.beta.end());
  fit.converged = r.converged && !hit_separation;
  fit.iterations = r.iterations;
  fit.ridge = used_ridge;
  for (double b : r.beta)
    if (!std::isfinite(b)) throw std::runtime_error("non-finite logistic coefficients");
  return fit;
}

std::vector<double> logistic_loglik_trace(const Dataset& data, int max_iter, double tol,
                                          double ridge) {
  std::vector<double> trace;
  irls(data, max_iter, tol, ridge, &trace);
  return trace;
}

LogisticFit case_control_adjust(LogisticFit fit, std::size_t n1, std::size_t n0,
                                const PrevalenceSpec& prev) {
  if (n1 == 0 || n0 == 0) throw std::invalid_argument("case_control_adjust needs n1, n0 > 0");
  fit.intercept += std::log(prev.p1 * static_cast<double>(n0) /
                            (prev.p0() * static_cast<double>(n1)));
  return fit;
}

ThresholdResult ppv_threshold(const std::vector<double>& scores, const std::vector<int>& labels,
                              double alpha, const PrevalenceSpec& prev) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores/labels length mismatch");
  const std::size_t n = scores.size();
  std::size_t n1 = 0;
  for (int y : labels) n1 += (y == 1);
  std::size_t n0 = n - n1;
  if (n1 == 0 || n0 == 0)
    throw std::invalid_argument("ppv_threshold needs at least one case and one control");

  // sort rows by score ascending; sweep thresholds between distinct values
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const double inf = std::numeric_limits<double>::infinity();
  ThresholdResult best_feasible, best_any;
  bool have_feasible = false, have_any = false;

  auto consider = [&](double t, std::size_t cases_above, std::size_t controls_above) {
    double tpr = static_cast<double>(cases_above) / static_cast<double>(n1);
    double fpr = static_cast<double>(controls_above) / static_cast<double>(n0);
    double v = ppv(tpr, fpr, prev);
    ThresholdResult cand{t, v >= alpha, tpr, fpr, v};
    if (cand.feasible) {
      if (!have_feasible || cand.tpr > best_feasible.tpr ||
          (cand.tpr == best_feasible.tpr && cand.threshold < best_feasible.threshold)) {
        best_feasible = cand;
        have_feasible = true;
      }
    }
    if (!have_any || cand.ppv > best_any.ppv ||
        (cand.ppv == best_any.ppv && (cand.tpr > best_any.tpr ||
                                      (cand.tpr == best_any.tpr && cand.threshold < best_any.threshold)))) {
      best_any = cand;
      have_any = true;
    }
  };

  // -inf sentinel: everyone flagged
  consider(-inf, n1, n0);
  std::size_t cases_above = n1, controls_above = n0;
  for (std::size_t i = 0; i < n;) {
    double v = scores[order[i]];
    // remove the whole tie group from the flagged side
    while (i < n && scores[order[i]] == v) {
      if (labels[order[i]] == 1)
        --cases_above;
      else
        --controls_above;
      ++i;
    }
    double t = (i < n) ? 0.5 * (v + scores[order[i]]) : inf;  // midpoint or +inf sentinel
    consider(t, cases_above, controls_above);
  }

  if (have_feasible) return best_feasible;
  best_any.feasible = false;
  return best_any;
}

FittedRule standard_rule(const Dataset& data, double alpha, const PrevalenceSpec& prev) {
  LogisticFit fit = fit_logistic(data);
  if (data.sampling_design == SamplingDesign::CaseControl)
    fit = case_control_adjust(fit, data.n1, data.n0, prev);

  const std::size_t n = data.size();
  std::vector<double> probs(n), lps(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    lps[i] = fit.linear_predictor(data.samples[i].features);
    probs[i] = clamp_prob(1.0 / (1.0 + std::exp(-lps[i])));
    labels[i] = data.samples[i].label;
  }
  ThresholdResult th = ppv_threshold(probs, labels, alpha, prev);

  // fold the probability cutoff into the intercept; the +/-inf sentinels map
  // to cut points just past the observed training score range, preserving all
  // training decisions
  double cut;
  if (std::isfinite(th.threshold)) {
    cut = std::log(th.threshold / (1.0 - th.threshold));
  } else {
    auto [lo, hi] = std::minmax_element(lps.begin(), lps.end());
    cut = th.threshold < 0.0 ? *lo - 1.0 : *hi + 1.0;
  }

  FittedRule out;
  out.rule.intercept = fit.intercept - cut;
  out.rule.slopes = fit.slopes;
  out.alpha = alpha;
  out.kappa_hat = 0.0;
  out.lambda_hat = 0.0;
  out.h = 0.0;
  out.feasible = th.feasible;
  auto [tpr, fpr] = empirical_rates(out.rule, data);
  out.train_metrics = {tpr, fpr, ppv(tpr, fpr, prev)};
  return out;
}

}  // namespace ppvrule
