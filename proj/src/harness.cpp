#include "ppvrule/harness.hpp"

#include "ppvrule/glm.hpp"
#include "ppvrule/metrics.hpp"
#include "ppvrule/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ppvrule {

RuleMetrics evaluate_fn(const std::function<int(const std::vector<double>&)>& decide,
                        const Dataset& test, const PrevalenceSpec& prev) {
  if (test.n1 == 0 || test.n0 == 0)
    throw std::invalid_argument("evaluation needs both strata in the test set");
  std::size_t c1 = 0, c0 = 0;
  for (const auto& s : test.samples) {
    int d = decide(s.features);
    if (s.label == 1)
      c1 += d;
    else
      c0 += d;
  }
  double tpr = static_cast<double>(c1) / static_cast<double>(test.n1);
  double fpr = static_cast<double>(c0) / static_cast<double>(test.n0);
  return {tpr, fpr, ppv(tpr, fpr, prev)};
}

RuleMetrics evaluate(const LinearRule& rule, const Dataset& test, const PrevalenceSpec& prev) {
  return evaluate_fn([&](const std::vector<double>& x) { return rule.decide(x); }, test, prev);
}

RuleMetrics evaluate(const PluginRule& rule, const Dataset& test, const PrevalenceSpec& prev) {
  return evaluate_fn([&](const std::vector<double>& x) { return rule.decide(x); }, test, prev);
}

Method method_from_name(const std::string& name) {
  if (name == "standard") return Method::Standard;
  if (name == "plugin-logistic") return Method::PluginLogistic;
  if (name == "plugin-knn") return Method::PluginKnn;
  if (name == "doolr") return Method::Doolr;
  if (name == "it-doolr") return Method::ItDoolr;
  throw std::invalid_argument("unknown method: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Standard: return "standard";
    case Method::PluginLogistic: return "plugin-logistic";
    case Method::PluginKnn: return "plugin-knn";
    case Method::Doolr: return "doolr";
    case Method::ItDoolr: return "it-doolr";
  }
  throw std::invalid_argument("unknown method");
}

namespace {

bool scenario_has_external(ScenarioKind k) {
  return k == ScenarioKind::ExternalI || k == ScenarioKind::ExternalII ||
         k == ScenarioKind::ExternalIII;
}

ScenarioSpec scenario_spec(ScenarioKind kind, std::size_t n, std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = kind;
  s.seed = seed;
  // nested case-control sizes are expressed as totals n = n1 + 20*n1
  s.n = kind == ScenarioKind::NestedCaseControl ? std::max<std::size_t>(n / 21, 1) : n;
  return s;
}

struct CellResult {
  bool ok = false;
  double tpr = 0.0, ppv = 0.0;
};

}  // namespace

BenchmarkTable run_benchmark(const BenchmarkConfig& config) {
  if (config.methods.empty()) throw std::invalid_argument("no methods requested");
  if (config.reps < 1) throw std::invalid_argument("reps must be positive");
  const bool has_external = scenario_has_external(config.scenario);
  for (Method m : config.methods)
    if (m == Method::ItDoolr && !has_external)
      throw std::invalid_argument("it-doolr requires an external-information scenario");

  const std::size_t n_alpha = config.alphas.size();
  const std::size_t n_method = config.methods.size();
  const std::size_t cells = n_alpha * n_method;
  std::vector<CellResult> results(static_cast<std::size_t>(config.reps) * cells);

  auto run_replicate = [&](int rep) {
    const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(rep) * kReplicateStride;
    std::optional<ExternalRule> external;
    Dataset train, test;
    try {
      train = generate_scenario(
          scenario_spec(config.scenario, config.n_train, derive_seed(rep_seed, 1)), &external);
      std::optional<ExternalRule> ignored;
      test = generate_scenario(
          scenario_spec(config.scenario, config.n_test, derive_seed(rep_seed, 2)), &ignored);
    } catch (const std::exception&) {
      return;  // all cells of this replicate stay failed
    }
    for (std::size_t ai = 0; ai < n_alpha; ++ai) {
      const double alpha = config.alphas[ai];
      for (std::size_t mi = 0; mi < n_method; ++mi) {
        CellResult& slot =
            results[static_cast<std::size_t>(rep) * cells + ai * n_method + mi];
        const std::uint64_t fit_seed = derive_seed(rep_seed, 0x10 + ai * 16 + mi);
        try {
          RuleMetrics m;
          switch (config.methods[mi]) {
            case Method::Standard:
              m = evaluate(standard_rule(train, alpha, config.prev).rule, test, config.prev);
              break;
            case Method::PluginLogistic:
              m = evaluate(plugin_fit(train, PluginEstimator::Logistic, alpha, config.prev), test,
                           config.prev);
              break;
            case Method::PluginKnn:
              m = evaluate(
                  plugin_fit(train, PluginEstimator::Knn, alpha, config.prev, config.knn_k), test,
                  config.prev);
              break;
            case Method::Doolr: {
              DoolrConfig cfg = config.doolr;
              cfg.alpha = alpha;
              cfg.seed = fit_seed;
              m = evaluate(doolr_fit(train, config.prev, cfg).rule, test, config.prev);
              break;
            }
            case Method::ItDoolr: {
              ItConfig cfg = config.it;
              cfg.base.alpha = alpha;
              cfg.base.seed = fit_seed;
              m = evaluate(itdoolr_fit(train, *external, config.prev, cfg).rule, test,
                           config.prev);
              break;
            }
          }
          slot = {true, m.tpr, m.ppv};
        } catch (const std::exception&) {
          slot.ok = false;
        }
      }
    }
  };

  int threads = config.threads > 0
                    ? config.threads
                    : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, config.reps);
  if (threads <= 1) {
    for (int rep = 0; rep < config.reps; ++rep) run_replicate(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < config.reps; rep = next.fetch_add(1))
          run_replicate(rep);
      });
    for (auto& th : pool) th.join();
  }

  BenchmarkTable table;
  for (std::size_t ai = 0; ai < n_alpha; ++ai) {
    for (std::size_t mi = 0; mi < n_method; ++mi) {
      BenchmarkCell cell;
      cell.scenario = scenario_name(config.scenario);
      cell.n = config.n_train;
      cell.alpha = config.alphas[ai];
      cell.method = method_name(config.methods[mi]);
      double sum_t = 0.0, sum_p = 0.0;
      std::vector<double> tprs, ppvs;
      for (int rep = 0; rep < config.reps; ++rep) {  // fixed replicate-index order
        const CellResult& r = results[static_cast<std::size_t>(rep) * cells + ai * n_method + mi];
        if (!r.ok) {
          ++cell.failures;
          continue;
        }
        tprs.push_back(r.tpr);
        ppvs.push_back(r.ppv);
        sum_t += r.tpr;
        sum_p += r.ppv;
      }
      cell.reps = static_cast<int>(tprs.size());
      if (cell.reps > 0) {
        cell.tpr_mean = sum_t / cell.reps;
        cell.ppv_mean = sum_p / cell.reps;
        if (cell.reps > 1) {
          double vt = 0.0, vp = 0.0;
          for (double v : tprs) vt += (v - cell.tpr_mean) * (v - cell.tpr_mean);
          for (double v : ppvs) vp += (v - cell.ppv_mean) * (v - cell.ppv_mean);
          cell.tpr_sd = std::sqrt(vt / (cell.reps - 1));
          cell.ppv_sd = std::sqrt(vp / (cell.reps - 1));
        }
      }
      table.rows.push_back(std::move(cell));
    }
  }

  std::ostringstream meta;
  meta << "scenario=" << scenario_name(config.scenario);
  table.metadata.push_back(meta.str());
  table.metadata.push_back("seed=" + std::to_string(config.seed));
  table.metadata.push_back("reps=" + std::to_string(config.reps));
  table.metadata.push_back("n_train=" + std::to_string(config.n_train));
  table.metadata.push_back("n_test=" + std::to_string(config.n_test));
  table.metadata.push_back("prevalence=" + std::to_string(config.prev.p1));
  table.metadata.push_back(
      "kappa_grid=" +
      std::to_string(config.doolr.kappa_grid.empty() ? 101 : config.doolr.kappa_grid.size()));
  table.metadata.push_back("restarts=" + std::to_string(config.doolr.restarts));
  table.metadata.push_back(std::string("h=") +
                           (config.doolr.smoothing.method == SmoothingSpec::Method::Adaptive
                                ? "adaptive"
                                : "fixed"));
  return table;
}

LinearRule brute_force_best_linear(const Dataset& data, double alpha, const PrevalenceSpec& prev,
                                   int angle_steps) {
  if (data.dim() != 2)
    throw std::invalid_argument("brute_force_best_linear supports exactly two features");
  if (angle_steps < 360) throw std::invalid_argument("angle_steps must be at least 360");
  if (data.n1 == 0 || data.n0 == 0) throw std::invalid_argument("both strata required");

  const std::size_t n = data.size();
  std::vector<double> proj(n);
  std::vector<std::size_t> order(n);

  double best_tpr = -1.0, best_ppv = -1.0;
  bool have_feasible = false;
  LinearRule best;
  best.slopes = {1.0, 0.0};
  best.intercept = 0.0;

  const double pi = 3.14159265358979323846;
  for (int k = 0; k < angle_steps; ++k) {
    double theta = pi * static_cast<double>(k) / static_cast<double>(angle_steps);
    double ux = std::cos(theta), uy = std::sin(theta);
    for (double sign : {1.0, -1.0}) {
      double dx = sign * ux, dy = sign * uy;
      for (std::size_t i = 0; i < n; ++i)
        proj[i] = dx * data.samples[i].features[0] + dy * data.samples[i].features[1];
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });

      auto consider = [&](double t, std::size_t cases_above, std::size_t controls_above) {
        double tpr = static_cast<double>(cases_above) / static_cast<double>(data.n1);
        double fpr = static_cast<double>(controls_above) / static_cast<double>(data.n0);
        double v = ppv(tpr, fpr, prev);
        bool feasible = v >= alpha;
        bool better = feasible ? (!have_feasible || tpr > best_tpr)
                               : (!have_feasible && v > best_ppv);
        if (better) {
          have_feasible = have_feasible || feasible;
          best_tpr = tpr;
          best_ppv = v;
          best.slopes = {dx, dy};
          best.intercept = -t;
        }
      };

      // sentinels sit just outside the observed projection range
      double lo = proj[order.front()] - 1.0, hi = proj[order.back()] + 1.0;
      std::size_t cases_above = data.n1, controls_above = data.n0;
      consider(lo, cases_above, controls_above);
      for (std::size_t i = 0; i < n;) {
        double v = proj[order[i]];
        while (i < n && proj[order[i]] == v) {
          if (data.samples[order[i]].label == 1)
            --cases_above;
          else
            --controls_above;
          ++i;
        }
        double t = i < n ? 0.5 * (v + proj[order[i]]) : hi;
        consider(t, cases_above, controls_above);
      }
    }
  }
  return best;
}

namespace {

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_mean_sd(double mean, double sd) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f(%.3f)", mean, sd);
  return buf;
}

}  // namespace

std::string emit_table(const BenchmarkTable& table, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::Csv) {
    for (const auto& m : table.metadata) out << "# " << m << "\n";
    out << "scenario,n,alpha,method,tpr_mean,tpr_sd,ppv_mean,ppv_sd,reps,failures\n";
    for (const auto& r : table.rows)
      out << r.scenario << ',' << r.n << ',' << fmt6(r.alpha) << ',' << r.method << ','
          << fmt6(r.tpr_mean) << ',' << fmt6(r.tpr_sd) << ',' << fmt6(r.ppv_mean) << ','
          << fmt6(r.ppv_sd) << ',' << r.reps << ',' << r.failures << "\n";
  } else {
    out << "| scenario | n | alpha | method | TPR | PPV | reps | failures |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : table.rows)
      out << "| " << r.scenario << " | " << r.n << " | " << fmt6(r.alpha) << " | " << r.method
          << " | " << fmt_mean_sd(r.tpr_mean, r.tpr_sd) << " | "
          << fmt_mean_sd(r.ppv_mean, r.ppv_sd) << " | " << r.reps << " | " << r.failures
          << " |\n";
    for (const auto& m : table.metadata) out << m << "\n";
  }
  return out.str();
}

BenchmarkTable parse_table_csv(const std::string& text) {
  BenchmarkTable table;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.metadata.push_back(line.size() > 2 ? line.substr(2) : "");
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column order is fixed by emit_table
      continue;
    }
    std::istringstream row(line);
    std::string tok;
    BenchmarkCell c;
    std::getline(row, c.scenario, ',');
    std::getline(row, tok, ',');
    c.n = static_cast<std::size_t>(std::stoull(tok));
    std::getline(row, tok, ',');
    c.alpha = std::stod(tok);
    std::getline(row, c.method, ',');
    std::getline(row, tok, ',');
    c.tpr_mean = std::stod(tok);
    std::getline(row, tok, ',');
    c.tpr_sd = std::stod(tok);
    std::getline(row, tok, ',');
    c.ppv_mean = std::stod(tok);
    std::getline(row, tok, ',');
    c.ppv_sd = std::stod(tok);
    std::getline(row, tok, ',');
    c.reps = std::stoi(tok);
    std::getline(row, tok, ',');
    c.failures = std::stoi(tok);
    table.rows.push_back(std::move(c));
  }
  return table;
}

}  // namespace ppvrule
