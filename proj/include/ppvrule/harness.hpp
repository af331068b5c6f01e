#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ppvrule/doolr.hpp"
#include "ppvrule/itdoolr.hpp"
#include "ppvrule/plugin.hpp"
#include "ppvrule/simgen.hpp"
#include "ppvrule/types.hpp"

namespace ppvrule {

/// Hard-indicator test metrics with the prevalence-weighted PPV.
RuleMetrics evaluate(const LinearRule& rule, const Dataset& test, const PrevalenceSpec& prev);
RuleMetrics evaluate(const PluginRule& rule, const Dataset& test, const PrevalenceSpec& prev);
RuleMetrics evaluate_fn(const std::function<int(const std::vector<double>&)>& decide,
                        const Dataset& test, const PrevalenceSpec& prev);

enum class Method { Standard, PluginLogistic, PluginKnn, Doolr, ItDoolr };

Method method_from_name(const std::string& name);
std::string method_name(Method m);

struct BenchmarkCell {
  std::string scenario;
  std::size_t n = 0;
  double alpha = 0.0;
  std::string method;
  double tpr_mean = 0.0, tpr_sd = 0.0;
  double ppv_mean = 0.0, ppv_sd = 0.0;
  int reps = 0;      // successful replicates aggregated
  int failures = 0;  // replicates that threw for this cell
};

struct BenchmarkTable {
  std::vector<BenchmarkCell> rows;
  std::vector<std::string> metadata;  // "key=value" lines (seeds, grids, h policy)
};

struct BenchmarkConfig {
  ScenarioKind scenario = ScenarioKind::Linear;
  std::vector<Method> methods;
  std::vector<double> alphas = {0.04};
  int reps = 100;
  std::size_t n_train = 2500;  // for NestedCaseControl: total n (n1 = n/21)
  std::size_t n_test = 20000;
  PrevalenceSpec prev{0.01};
  std::uint64_t seed = 20240501;
  int threads = 0;  // 0 = hardware concurrency
  DoolrConfig doolr;              // template; per-replicate seeds are derived
  ItConfig it;                    // template for IT-DOOLR
  std::size_t knn_k = 0;          // 0 = default_knn_k(n_train)
};

/// Fits every method at every alpha for each replicate on its own seeded
/// train/test pair and aggregates mean/SD of test TPR and PPV. Replicates run
/// in parallel; aggregation order is fixed by replicate index, so the output
/// does not depend on the thread count.
BenchmarkTable run_benchmark(const BenchmarkConfig& config);

/// Exhaustive two-feature oracle: sweeps angle_steps directions over [0, pi)
/// (both orientations) and every midpoint intercept, keeping the feasible rule
/// with maximal TPR. Exact over the scanned grid; p must equal 2.
LinearRule brute_force_best_linear(const Dataset& data, double alpha, const PrevalenceSpec& prev,
                                   int angle_steps);

enum class TableFormat { Csv, Markdown };

std::string emit_table(const BenchmarkTable& table, TableFormat format);

/// Parses a CSV produced by emit_table back into cells (numeric fields to the
/// emitted precision).
BenchmarkTable parse_table_csv(const std::string& text);

}  // namespace ppvrule
