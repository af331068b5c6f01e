#include "ppvrule/doolr.hpp"

#include "ppvrule/glm.hpp"
#include "ppvrule/rng.hpp"
#include "fit_detail.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ppvrule {

namespace detail {

std::vector<std::size_t> canonical_order(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& sa = data.samples[a];
    const auto& sb = data.samples[b];
    if (sa.label != sb.label) return sa.label > sb.label;  // cases first
    return std::lexicographical_compare(sa.features.begin(), sa.features.end(),
                                        sb.features.begin(), sb.features.end());
  });
  return idx;
}

LinearProblem build_problem(const Dataset& data, const ExternalRule* external,
                            const PrevalenceSpec& prev, double alpha, bool standardize) {
  if (external && external->values.size() != data.size())
    throw std::invalid_argument("external signal count does not match dataset");

  const std::size_t p = data.dim();
  LinearProblem prob;
  prob.dim = p + 1;
  prob.gamma = prev.gamma();
  prob.alpha = alpha;

  auto order = canonical_order(data);

  if (standardize) {
    // accumulate in canonical order so the fit is invariant to sample order
    FeatureScaling sc;
    sc.mean.assign(p, 0.0);
    sc.sd.assign(p, 0.0);
    for (std::size_t i : order)
      for (std::size_t j = 0; j < p; ++j) sc.mean[j] += data.samples[i].features[j];
    for (std::size_t j = 0; j < p; ++j) sc.mean[j] /= static_cast<double>(data.size());
    for (std::size_t i : order)
      for (std::size_t j = 0; j < p; ++j) {
        double d = data.samples[i].features[j] - sc.mean[j];
        sc.sd[j] += d * d;
      }
    for (std::size_t j = 0; j < p; ++j) {
      sc.sd[j] = data.size() > 1
                     ? std::sqrt(sc.sd[j] / static_cast<double>(data.size() - 1))
                     : 0.0;
      if (sc.sd[j] < 1e-12) sc.sd[j] = 1.0;  // constant feature
    }
    prob.scaling = std::move(sc);
  }
  prob.cases.reserve(data.n1 * prob.dim);
  prob.controls.reserve(data.n0 * prob.dim);
  for (std::size_t i : order) {
    const auto& s = data.samples[i];
    auto& dst = s.label == 1 ? prob.cases : prob.controls;
    dst.push_back(1.0);
    for (std::size_t j = 0; j < p; ++j) {
      double v = s.features[j];
      if (prob.scaling) v = (v - prob.scaling->mean[j]) / prob.scaling->sd[j];
      dst.push_back(v);
    }
    if (external && s.label == 1) prob.case_signals.push_back(external->values[i]);
  }
  return prob;
}

namespace {

inline double dot_row(const double* row, const double* beta, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) s += row[j] * beta[j];
  return s;
}

struct Weights {
  double w1;  // on the surrogate TPR term
  double w0;  // on the surrogate FPR term
};

inline Weights kappa_weights(const LinearProblem& prob, double kappa) {
  return {1.0 - kappa + kappa * prob.gamma * (1.0 - prob.alpha), kappa * prob.alpha};
}

}  // namespace

double smooth_objective(const LinearProblem& prob, const double* beta, double kappa, double eta,
                        double h) {
  const auto [w1, w0] = kappa_weights(prob, kappa);
  const std::size_t dim = prob.dim;
  const double inv_h = 1.0 / h;

  double sum1 = 0.0;
  for (std::size_t i = 0; i < prob.cases.size(); i += dim)
    sum1 += normal_cdf(dot_row(&prob.cases[i], beta, dim) * inv_h);
  double sum0 = 0.0;
  for (std::size_t i = 0; i < prob.controls.size(); i += dim)
    sum0 += normal_cdf(dot_row(&prob.controls[i], beta, dim) * inv_h);

  double obj = w1 * sum1 / static_cast<double>(prob.n1()) -
               w0 * sum0 / static_cast<double>(prob.n0());

  if (eta != 0.0) {
    double pen = 0.0;
    std::size_t r = 0;
    for (std::size_t i = 0; i < prob.cases.size(); i += dim, ++r) {
      double s = dot_row(&prob.cases[i], beta, dim);
      pen += normal_cdf(-s * prob.case_signals[r] * inv_h);
    }
    obj -= eta * pen / static_cast<double>(prob.n1());
  }
  return obj;
}

double smooth_objective_gradient(const LinearProblem& prob, const double* beta, double kappa,
                                 double eta, double h, double* grad) {
  const auto [w1, w0] = kappa_weights(prob, kappa);
  const std::size_t dim = prob.dim;
  const double inv_h = 1.0 / h;
  const double inv_n1 = 1.0 / static_cast<double>(prob.n1());
  const double inv_n0 = 1.0 / static_cast<double>(prob.n0());

  std::fill(grad, grad + dim, 0.0);
  double sum1 = 0.0, sum0 = 0.0, pen = 0.0;

  std::size_t r = 0;
  for (std::size_t i = 0; i < prob.cases.size(); i += dim, ++r) {
    const double* row = &prob.cases[i];
    double z = dot_row(row, beta, dim) * inv_h;
    sum1 += normal_cdf(z);
    double coef = w1 * inv_n1 * normal_pdf(z) * inv_h;
    if (eta != 0.0) {
      double g = prob.case_signals[r];
      double zp = -z * g;  // (-s*g)/h
      pen += normal_cdf(zp);
      coef += eta * inv_n1 * normal_pdf(zp) * g * inv_h;
    }
    if (coef != 0.0)
      for (std::size_t j = 0; j < dim; ++j) grad[j] += coef * row[j];
  }
  for (std::size_t i = 0; i < prob.controls.size(); i += dim) {
    const double* row = &prob.controls[i];
    double z = dot_row(row, beta, dim) * inv_h;
    sum0 += normal_cdf(z);
    double coef = -w0 * inv_n0 * normal_pdf(z) * inv_h;
    if (coef != 0.0)
      for (std::size_t j = 0; j < dim; ++j) grad[j] += coef * row[j];
  }
  return w1 * sum1 * inv_n1 - w0 * sum0 * inv_n0 - eta * pen * inv_n1;
}

namespace {

// BFGS ascent (implemented as descent on the negated objective) with Armijo
// backtracking. Dimension is tiny (p+1), so the inverse-Hessian approximation
// is kept dense.
OptimizerResult bfgs_ascent(const LinearProblem& prob, double kappa, double eta, double h,
                            std::vector<double> x, int max_iter, double grad_tol) {
  const std::size_t m = prob.dim;
  std::vector<double> g(m), g_new(m), d(m), hy(m);
  std::vector<double> hess_inv(m * m, 0.0);
  auto reset_h = [&] {
    std::fill(hess_inv.begin(), hess_inv.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) hess_inv[j * m + j] = 1.0;
  };
  reset_h();

  double obj = smooth_objective_gradient(prob, x.data(), kappa, eta, h, g.data());
  if (!std::isfinite(obj)) throw std::runtime_error("non-finite objective in optimizer");

  OptimizerResult best{x, obj};
  std::vector<double> cand(m);

  for (int iter = 0; iter < max_iter; ++iter) {
    double gmax = 0.0;
    for (double v : g) gmax = std::max(gmax, std::abs(v));
    if (gmax < grad_tol) break;

    // ascent direction d = H * g (H approximates the inverse of -Hessian)
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += hess_inv[i * m + j] * g[j];
      d[i] = s;
    }
    double gd = 0.0;
    for (std::size_t j = 0; j < m; ++j) gd += g[j] * d[j];
    if (!(gd > 0.0)) {  // not an ascent direction; fall back to the gradient
      d = g;
      gd = 0.0;
      for (double v : g) gd += v * v;
      reset_h();
      if (!(gd > 0.0)) break;
    }

    double step = 1.0;
    double obj_new = -std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      for (std::size_t j = 0; j < m; ++j) cand[j] = x[j] + step * d[j];
      obj_new = smooth_objective(prob, cand.data(), kappa, eta, h);
      if (!std::isfinite(obj_new)) throw std::runtime_error("non-finite objective in optimizer");
      if (obj_new >= obj + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    obj_new = smooth_objective_gradient(prob, cand.data(), kappa, eta, h, g_new.data());

    // BFGS update of the inverse approximation (s = step*d, y = -(g_new - g)
    // in minimization terms; signs fold together below)
    double sy = 0.0, ss = 0.0, yy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double sj = cand[j] - x[j];
      double yj = g[j] - g_new[j];  // y of the negated problem
      sy += sj * yj;
      ss += sj * sj;
      yy += yj * yj;
    }
    if (sy > 1e-12 * std::sqrt(ss * yy) && sy > 0.0) {
      double rho = 1.0 / sy;
      for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += hess_inv[i * m + j] * (g[j] - g_new[j]);
        hy[i] = s;
      }
      double yhy = 0.0;
      for (std::size_t j = 0; j < m; ++j) yhy += (g[j] - g_new[j]) * hy[j];
      for (std::size_t i = 0; i < m; ++i) {
        double si = cand[i] - x[i];
        for (std::size_t j = 0; j < m; ++j) {
          double sj = cand[j] - x[j];
          hess_inv[i * m + j] += -rho * (si * hy[j] + hy[i] * sj) +
                                 (rho * rho * yhy + rho) * si * sj;
        }
      }
    }

    x = cand;
    g = g_new;
    obj = obj_new;
    if (obj > best.objective) best = {x, obj};
  }
  if (obj > best.objective) best = {std::move(x), obj};
  return best;
}

}  // namespace

namespace {

// The adaptive bandwidth is usually tiny, leaving the target surface riddled
// with flat spots and local maxima. Optimizing through a decreasing bandwidth
// schedule tracks the smooth-scale optimum down to the target scale.
OptimizerResult continuation_ascent(const LinearProblem& prob, double kappa, double eta, double h,
                                    std::vector<double> x, int max_iter, double grad_tol) {
  for (double factor : {27.0, 9.0, 3.0}) {
    if (h * factor > 50.0) continue;
    x = bfgs_ascent(prob, kappa, eta, h * factor, std::move(x), max_iter, grad_tol).beta;
  }
  return bfgs_ascent(prob, kappa, eta, h, std::move(x), max_iter, grad_tol);
}

}  // namespace

OptimizerResult maximize_smooth(const LinearProblem& prob, double kappa, double eta, double h,
                                const std::vector<double>& init, int restarts, int max_iter,
                                double grad_tol, std::uint64_t seed, std::uint64_t rng_tag) {
  if (init.size() != prob.dim) throw std::invalid_argument("init has wrong length");
  double norm = 0.0;
  for (double v : init) norm += v * v;
  norm = std::sqrt(norm);
  const double sd = 0.25 * (norm > 0.0 ? norm : 1.0);

  Rng rng(derive_seed(seed, rng_tag));
  // the plain ascent from init comes first so the returned objective can
  // never fall below what init itself achieves
  OptimizerResult best = bfgs_ascent(prob, kappa, eta, h, init, max_iter, grad_tol);
  OptimizerResult cont = continuation_ascent(prob, kappa, eta, h, init, max_iter, grad_tol);
  if (cont.objective > best.objective) best = std::move(cont);
  std::vector<double> start(prob.dim);
  for (int r = 1; r < restarts; ++r) {
    for (std::size_t j = 0; j < prob.dim; ++j) start[j] = init[j] + sd * rng.normal();
    OptimizerResult cand = continuation_ascent(prob, kappa, eta, h, start, max_iter, grad_tol);
    if (cand.objective > best.objective) best = std::move(cand);
  }
  return best;
}

FittedRule fit_linear_rule(const Dataset& data, const ExternalRule* external, double eta,
                           const PrevalenceSpec& prev, const DoolrConfig& config) {
  if (data.n1 < 2 || data.n0 < 2)
    throw std::invalid_argument("constrained fit needs at least two cases and two controls");

  std::vector<double> grid = config.kappa_grid.empty() ? uniform_kappa_grid() : config.kappa_grid;
  if (!std::is_sorted(grid.begin(), grid.end()))
    throw std::invalid_argument("kappa grid must be sorted ascending");
  for (double k : grid)
    if (!(k >= 0.0 && k < 1.0)) throw std::invalid_argument("kappa values must lie in [0,1)");

  LinearProblem prob = build_problem(data, external, prev, config.alpha, config.standardize);

  // canonical standardized dataset for the logistic initializer and bandwidth
  Dataset std_data;
  std_data.feature_names = data.feature_names;
  std_data.sampling_design = data.sampling_design;
  std_data.samples.reserve(data.size());
  const std::size_t p = prob.dim - 1;
  auto push_rows = [&](const std::vector<double>& flat, int label) {
    for (std::size_t i = 0; i < flat.size(); i += prob.dim) {
      LabeledSample s;
      s.label = label;
      s.features.assign(flat.begin() + static_cast<std::ptrdiff_t>(i + 1),
                        flat.begin() + static_cast<std::ptrdiff_t>(i + 1 + p));
      std_data.samples.push_back(std::move(s));
    }
  };
  push_rows(prob.cases, 1);
  push_rows(prob.controls, 0);
  std_data.recount();

  LogisticFit init_fit = fit_logistic(std_data);
  if (data.sampling_design == SamplingDesign::CaseControl)
    init_fit = case_control_adjust(init_fit, data.n1, data.n0, prev);
  std::vector<double> beta0;
  beta0.push_back(init_fit.intercept);
  beta0.insert(beta0.end(), init_fit.slopes.begin(), init_fit.slopes.end());

  double h;
  if (config.smoothing.method == SmoothingSpec::Method::Fixed)
    h = std::max(config.smoothing.fixed_h, config.smoothing.h_min);
  else
    h = adaptive_bandwidth(std_data, beta0, config.smoothing.h_min);

  struct Candidate {
    double kappa;
    std::vector<double> beta;
    double tpr, ppv;
  };

  // The smoothed objective saturates once every case score clears the
  // bandwidth, leaving the intercept indeterminate over a plateau of
  // feasible rules. Re-solving the cut along the candidate's own score axis
  // pins the intercept at the constraint boundary: max hard TPR subject to
  // hard PPV >= alpha, exactly the root the kappa search targets.
  const std::size_t n_rows = prob.n1() + prob.n0();
  std::vector<double> scores(n_rows);
  std::vector<int> score_labels(n_rows);
  auto resolve_cut = [&](double kappa, std::vector<double> beta) -> Candidate {
    std::size_t r = 0;
    for (std::size_t i = 0; i < prob.cases.size(); i += prob.dim, ++r) {
      scores[r] = 0.0;
      for (std::size_t j = 0; j < prob.dim; ++j) scores[r] += prob.cases[i + j] * beta[j];
      score_labels[r] = 1;
    }
    for (std::size_t i = 0; i < prob.controls.size(); i += prob.dim, ++r) {
      scores[r] = 0.0;
      for (std::size_t j = 0; j < prob.dim; ++j) scores[r] += prob.controls[i + j] * beta[j];
      score_labels[r] = 0;
    }
    ThresholdResult th = ppv_threshold(scores, score_labels, config.alpha, prev);
    double cut = th.threshold;
    if (!std::isfinite(cut)) {
      auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
      cut = cut < 0.0 ? *lo - 1.0 : *hi + 1.0;
    }
    beta[0] -= cut;
    return {kappa, std::move(beta), th.tpr, th.ppv};
  };

  std::vector<Candidate> cands;
  cands.reserve(grid.size() + 1 + static_cast<std::size_t>(std::max(config.refine_rounds, 0)));

  // the initializer's direction is itself a candidate, so the plain fit can
  // never do worse on the training contract than the two-step baseline; for
  // the penalized fit it must not compete, or the unpenalized direction would
  // mute the external-information term
  if (eta == 0.0) cands.push_back(resolve_cut(grid.front(), beta0));

  std::vector<double> warm = beta0;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    OptimizerResult r = maximize_smooth(prob, grid[gi], eta, h, warm, config.restarts,
                                        config.max_iter, config.grad_tol, config.seed, gi);
    warm = r.beta;
    cands.push_back(resolve_cut(grid[gi], std::move(r.beta)));
  }

  // selection: among feasible candidates the max hard TPR; ties prefer the
  // least-constrained rule (smallest PPV, i.e. the binding constraint), then
  // the smaller kappa (candidates are kept sorted by kappa)
  auto select = [&]() -> std::size_t {
    std::size_t best = cands.size();
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (cands[i].ppv < config.alpha - config.feasibility_tol) continue;
      if (best == cands.size() || cands[i].tpr > cands[best].tpr ||
          (cands[i].tpr == cands[best].tpr && cands[i].ppv < cands[best].ppv))
        best = i;
    }
    return best;
  };

  // bisect the kappa bracket around the feasibility transition: the PPV of
  // the kappa-indexed optimum moves fast through the constraint at rare
  // prevalences, so the uniform grid alone lands well above alpha
  std::size_t sel = select();
  for (int round = 0; round < config.refine_rounds && sel != cands.size() && sel > 0; ++round) {
    const Candidate& prior = cands[sel - 1];
    if (prior.ppv >= config.alpha - config.feasibility_tol) break;
    double mid = 0.5 * (prior.kappa + cands[sel].kappa);
    if (!(mid > prior.kappa && mid < cands[sel].kappa)) break;
    // continue the constrained branch from the feasible side; starting from
    // the infeasible side tends to stay in the flag-everyone basin
    OptimizerResult r = maximize_smooth(prob, mid, eta, h, cands[sel].beta, 1, config.max_iter,
                                        config.grad_tol, config.seed,
                                        grid.size() + static_cast<std::size_t>(round));
    cands.insert(cands.begin() + static_cast<std::ptrdiff_t>(sel),
                 resolve_cut(mid, std::move(r.beta)));
    sel = select();
  }

  const Candidate* chosen = nullptr;
  bool feasible = sel != cands.size();
  if (feasible) {
    chosen = &cands[sel];
  } else {
    for (const auto& c : cands)
      if (!chosen || c.ppv > chosen->ppv || (c.ppv == chosen->ppv && c.tpr > chosen->tpr))
        chosen = &c;
  }
  if (!chosen) throw std::runtime_error("no fit candidates produced");

  std::vector<double> beta = chosen->beta;
  double norm = 0.0;
  for (double v : beta) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 1e-12)) throw std::runtime_error("degenerate (near-zero) fitted coefficients");
  for (double& v : beta) v /= norm;

  FittedRule out;
  out.rule.intercept = beta[0];
  out.rule.slopes.assign(beta.begin() + 1, beta.end());
  out.rule.standardization = prob.scaling;
  out.kappa_hat = chosen->kappa;
  out.lambda_hat = chosen->kappa / (1.0 - chosen->kappa);
  out.h = h;
  out.alpha = config.alpha;
  out.feasible = feasible;
  auto [tpr, fpr] = empirical_rates(out.rule, data);
  out.train_metrics = {tpr, fpr, ppv(tpr, fpr, prev)};
  return out;
}

}  // namespace detail

std::vector<double> uniform_kappa_grid(std::size_t n_points, double hi) {
  if (n_points < 2) throw std::invalid_argument("kappa grid needs at least two points");
  std::vector<double> g(n_points);
  for (std::size_t i = 0; i < n_points; ++i)
    g[i] = hi * static_cast<double>(i) / static_cast<double>(n_points - 1);
  return g;
}

double doolr_objective(const std::vector<double>& beta, const Dataset& data, double kappa,
                       double alpha, const PrevalenceSpec& prev, double h) {
  if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in [0,1)");
  auto [tpr_s, fpr_s] = smoothed_rates(beta, data, h);
  double w1 = 1.0 - kappa + kappa * prev.gamma() * (1.0 - alpha);
  return w1 * tpr_s - kappa * alpha * fpr_s;
}

std::vector<double> doolr_gradient(const std::vector<double>& beta, const Dataset& data,
                                   double kappa, double alpha, const PrevalenceSpec& prev,
                                   double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  if (beta.size() != data.dim() + 1) throw std::invalid_argument("beta must have length p+1");
  double w1 = 1.0 - kappa + kappa * prev.gamma() * (1.0 - alpha);
  double w0 = kappa * alpha;
  std::vector<double> grad(beta.size(), 0.0);
  const double inv_h = 1.0 / h;
  for (const auto& s : data.samples) {
    double z = beta[0];
    for (std::size_t j = 0; j < s.features.size(); ++j) z += beta[j + 1] * s.features[j];
    z *= inv_h;
    double coef = normal_pdf(z) * inv_h;
    coef *= s.label == 1 ? w1 / static_cast<double>(data.n1)
                         : -w0 / static_cast<double>(data.n0);
    grad[0] += coef;
    for (std::size_t j = 0; j < s.features.size(); ++j) grad[j + 1] += coef * s.features[j];
  }
  return grad;
}

std::vector<double> maximize_for_kappa(const Dataset& data, double kappa,
                                       const DoolrConfig& config, const PrevalenceSpec& prev,
                                       const std::vector<double>& init) {
  if (init.size() != data.dim() + 1) throw std::invalid_argument("init must have length p+1");
  detail::LinearProblem prob =
      detail::build_problem(data, nullptr, prev, config.alpha, /*standardize=*/false);
  double h;
  if (config.smoothing.method == SmoothingSpec::Method::Fixed)
    h = std::max(config.smoothing.fixed_h, config.smoothing.h_min);
  else
    h = adaptive_bandwidth(data, init, config.smoothing.h_min);
  std::uint64_t tag = std::bit_cast<std::uint64_t>(kappa);
  return detail::maximize_smooth(prob, kappa, 0.0, h, init, config.restarts, config.max_iter,
                                 config.grad_tol, config.seed, tag)
      .beta;
}

FittedRule doolr_fit(const Dataset& data, const PrevalenceSpec& prev, const DoolrConfig& config) {
  return detail::fit_linear_rule(data, nullptr, 0.0, prev, config);
}

}  // namespace ppvrule
