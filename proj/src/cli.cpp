#include "ppvrule/cli.hpp"

#include "ppvrule/harness.hpp"
#include "ppvrule/io.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ppvrule {

namespace {

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_csv_list(s)) out.push_back(std::stod(tok));
  return out;
}

struct FitOptions {
  std::string data_path, label = "D", features, method, design = "cohort";
  std::string external_col, external_mode = "score", out_path;
  double alpha = 0.04, prevalence = 0.01;
  std::uint64_t seed = 1;
  std::size_t kappa_points = 101;
  std::string eta_grid;
  double fixed_h = 0.0;
  bool no_standardize = false;
  std::size_t knn_k = 0;
  int restarts = 5;
  int cv_folds = 5;
};

int do_fit(const FitOptions& opt, std::ostream& out) {
  if (opt.design != "cohort" && opt.design != "case-control")
    throw CLI::ValidationError("--design", "must be cohort or case-control");
  if (opt.external_mode != "score" && opt.external_mode != "decision")
    throw CLI::ValidationError("--external-mode", "must be score or decision");
  CsvTable table = read_csv(opt.data_path);
  SamplingDesign design =
      opt.design == "case-control" ? SamplingDesign::CaseControl : SamplingDesign::Cohort;

  std::vector<std::string> feature_cols = split_csv_list(opt.features);
  if (feature_cols.empty()) {
    for (const auto& c : table.columns)
      if (c != opt.label && c != opt.external_col) feature_cols.push_back(c);
  }
  Dataset data = dataset_from_csv(table, opt.label, feature_cols, design);
  PrevalenceSpec prev(opt.prevalence);

  std::optional<ExternalRule> external;
  if (!opt.external_col.empty()) {
    ExternalMode mode =
        opt.external_mode == "decision" ? ExternalMode::Decision : ExternalMode::Score;
    external = external_from_csv(table, opt.external_col, mode);
  }
  if (opt.method == "it-doolr" && !external)
    throw CLI::ValidationError("--external", "it-doolr requires an external signal column");

  RuleDocument doc;
  doc.method = opt.method;
  doc.feature_names = feature_cols;
  doc.alpha = opt.alpha;
  doc.prevalence = opt.prevalence;
  doc.fit_timestamp = utc_timestamp();
  doc.seed = opt.seed;

  DoolrConfig dcfg;
  dcfg.alpha = opt.alpha;
  dcfg.seed = opt.seed;
  dcfg.restarts = opt.restarts;
  dcfg.standardize = !opt.no_standardize;
  dcfg.kappa_grid = uniform_kappa_grid(opt.kappa_points);
  if (opt.fixed_h > 0.0) {
    dcfg.smoothing.method = SmoothingSpec::Method::Fixed;
    dcfg.smoothing.fixed_h = opt.fixed_h;
  }

  if (opt.method == "standard") {
    FittedRule r = standard_rule(data, opt.alpha, prev);
    doc.linear = r.rule;
    doc.train_metrics = r.train_metrics;
    doc.feasible = r.feasible;
  } else if (opt.method == "doolr") {
    FittedRule r = doolr_fit(data, prev, dcfg);
    doc.linear = r.rule;
    doc.train_metrics = r.train_metrics;
    doc.feasible = r.feasible;
    doc.kappa_hat = r.kappa_hat;
    doc.lambda_hat = r.lambda_hat;
    doc.h = r.h;
  } else if (opt.method == "it-doolr") {
    ItConfig icfg;
    icfg.base = dcfg;
    icfg.cv_folds = opt.cv_folds;
    if (!opt.eta_grid.empty()) icfg.eta_grid = parse_double_list(opt.eta_grid);
    FittedRule r = itdoolr_fit(data, *external, prev, icfg);
    doc.linear = r.rule;
    doc.train_metrics = r.train_metrics;
    doc.feasible = r.feasible;
    doc.kappa_hat = r.kappa_hat;
    doc.lambda_hat = r.lambda_hat;
    doc.h = r.h;
    doc.eta = r.eta;
  } else if (opt.method == "plugin-logistic" || opt.method == "plugin-knn") {
    PluginEstimator est =
        opt.method == "plugin-knn" ? PluginEstimator::Knn : PluginEstimator::Logistic;
    PluginRule r = plugin_fit(data, est, opt.alpha, prev, opt.knn_k);
    doc.train_metrics = r.train_metrics;
    doc.feasible = r.feasible;
    doc.lambda_hat = r.lambda_hat;
    RuleDocument::PluginPayload payload;
    payload.lr_threshold = r.lr_threshold;
    if (est == PluginEstimator::Logistic) {
      payload.estimator = "logistic";
      const auto* lm = dynamic_cast<const LogisticRiskModel*>(r.risk.get());
      payload.intercept = lm->fit().intercept;
      payload.slopes = lm->fit().slopes;
    } else {
      payload.estimator = "knn";
      const auto* km = dynamic_cast<const KnnRiskModel*>(r.risk.get());
      payload.k = km->k();
      payload.odds_factor = km->odds_factor();
      payload.labels = km->labels();
      payload.features = km->features();
    }
    doc.plugin = std::move(payload);
  } else {
    throw CLI::ValidationError("--method", "unknown method: " + opt.method);
  }

  save_rule_document(opt.out_path, doc);
  out << "method=" << doc.method << " train_tpr=" << doc.train_metrics.tpr
      << " train_fpr=" << doc.train_metrics.fpr << " train_ppv=" << doc.train_metrics.ppv
      << " feasible=" << (doc.feasible ? "true" : "false") << "\n";
  return doc.feasible ? 0 : 2;
}

struct EvalOptions {
  std::string rule_path, data_path, label = "D";
  double prevalence = -1.0;  // <0: use the document's value
};

int do_evaluate(const EvalOptions& opt, std::ostream& out) {
  RuleDocument doc = load_rule_document(opt.rule_path);
  CsvTable table = read_csv(opt.data_path);
  for (const auto& name : doc.feature_names) table.column_index(name);  // throws on mismatch
  Dataset data = dataset_from_csv(table, opt.label, doc.feature_names, SamplingDesign::Cohort);
  PrevalenceSpec prev(opt.prevalence > 0.0 ? opt.prevalence : doc.prevalence);
  RuleMetrics m = evaluate_fn(make_decider(doc), data, prev);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", m.tpr, m.fpr, m.ppv);
  out << "tpr,fpr,ppv\n" << buf << "\n";
  return 0;
}

struct SimulateOptions {
  std::string scenario, out_path;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
};

int do_simulate(const SimulateOptions& opt) {
  ScenarioSpec spec;
  spec.kind = scenario_from_name(opt.scenario);
  spec.n = spec.kind == ScenarioKind::NestedCaseControl ? std::max<std::size_t>(opt.n / 21, 1)
                                                        : opt.n;
  spec.seed = opt.seed;
  std::optional<ExternalRule> external;
  Dataset data = generate_scenario(spec, &external);
  write_dataset_csv(opt.out_path, data, external ? &*external : nullptr);
  return 0;
}

struct BenchOptions {
  std::string scenario = "linear", methods = "standard,doolr", format = "csv", out_path;
  std::string alphas = "0.04";
  int reps = 100;
  std::size_t n_train = 2500, n_test = 20000;
  std::uint64_t seed = 20240501;
  int threads = 0;
  std::size_t kappa_points = 51;
  int restarts = 2;
  std::size_t knn_k = 0;
  std::string eta_grid;
  int cv_folds = 5;
};

int do_bench(const BenchOptions& opt, std::ostream& out) {
  if (opt.format != "csv" && opt.format != "markdown")
    throw CLI::ValidationError("--format", "must be csv or markdown");
  BenchmarkConfig cfg;
  cfg.scenario = scenario_from_name(opt.scenario);
  for (const auto& m : split_csv_list(opt.methods)) cfg.methods.push_back(method_from_name(m));
  cfg.alphas = parse_double_list(opt.alphas);
  cfg.reps = opt.reps;
  cfg.n_train = opt.n_train;
  cfg.n_test = opt.n_test;
  cfg.seed = opt.seed;
  cfg.threads = opt.threads;
  cfg.doolr.kappa_grid = uniform_kappa_grid(opt.kappa_points);
  cfg.doolr.restarts = opt.restarts;
  cfg.it.base = cfg.doolr;
  cfg.it.cv_folds = opt.cv_folds;
  if (!opt.eta_grid.empty()) cfg.it.eta_grid = parse_double_list(opt.eta_grid);
  cfg.knn_k = opt.knn_k;

  BenchmarkTable table = run_benchmark(cfg);
  std::string text =
      emit_table(table, opt.format == "markdown" ? TableFormat::Markdown : TableFormat::Csv);
  if (opt.out_path.empty()) {
    out << text;
  } else {
    std::ofstream f(opt.out_path);
    if (!f) throw std::invalid_argument("cannot write " + opt.out_path);
    f << text;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PPV-constrained biomarker decision rules"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // keeps --h free for the bandwidth option

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a decision rule from a CSV file");
  fit_cmd->set_help_flag("--help", "print help");
  fit_cmd->add_option("--data", fit.data_path, "training CSV path")->required();
  fit_cmd->add_option("--label", fit.label, "label column (default D)");
  fit_cmd->add_option("--features", fit.features, "comma-separated feature columns");
  fit_cmd->add_option("--method", fit.method, "standard|plugin-logistic|plugin-knn|doolr|it-doolr")
      ->required();
  fit_cmd->add_option("--alpha", fit.alpha, "PPV constraint")->required();
  fit_cmd->add_option("--prevalence", fit.prevalence, "disease prevalence p1")->required();
  fit_cmd->add_option("--design", fit.design, "cohort|case-control");
  fit_cmd->add_option("--external", fit.external_col, "external signal column (it-doolr)");
  fit_cmd->add_option("--external-mode", fit.external_mode, "score|decision");
  fit_cmd->add_option("--seed", fit.seed, "fit seed");
  fit_cmd->add_option("--out", fit.out_path, "output rule JSON path")->required();
  fit_cmd->add_option("--kappa-grid", fit.kappa_points, "number of kappa grid points");
  fit_cmd->add_option("--eta-grid", fit.eta_grid, "comma-separated eta grid");
  fit_cmd->add_option("--h", fit.fixed_h, "fixed bandwidth (default adaptive)");
  fit_cmd->add_flag("--no-standardize", fit.no_standardize, "skip feature standardization");
  fit_cmd->add_option("--knn-k", fit.knn_k, "neighborhood size for plugin-knn");
  fit_cmd->add_option("--restarts", fit.restarts, "optimizer restarts per kappa");
  fit_cmd->add_option("--cv-folds", fit.cv_folds, "cross-validation folds (it-doolr)");

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a saved rule on a CSV file");
  eval_cmd->add_option("--rule", ev.rule_path, "rule JSON path")->required();
  eval_cmd->add_option("--data", ev.data_path, "evaluation CSV path")->required();
  eval_cmd->add_option("--label", ev.label, "label column (default D)");
  eval_cmd->add_option("--prevalence", ev.prevalence, "prevalence override");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a scenario dataset CSV");
  sim_cmd->add_option("--scenario", sim.scenario,
                      "linear|linear-contaminated|piecewise|nonlinear|external-1|external-2|"
                      "external-3|nested-case-control")
      ->required();
  sim_cmd->add_option("--n", sim.n, "sample size (total rows before contamination)")->required();
  sim_cmd->add_option("--seed", sim.seed, "generator seed");
  sim_cmd->add_option("--out", sim.out_path, "output CSV path")->required();

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "run a replicated benchmark");
  bench_cmd->add_option("--scenario", bench.scenario, "scenario name");
  bench_cmd->add_option("--methods", bench.methods, "comma-separated method list");
  bench_cmd->add_option("--alphas", bench.alphas, "comma-separated PPV constraints");
  bench_cmd->add_option("--reps", bench.reps, "replicates");
  bench_cmd->add_option("--n-train", bench.n_train, "training size per replicate");
  bench_cmd->add_option("--n-test", bench.n_test, "test size per replicate");
  bench_cmd->add_option("--seed", bench.seed, "base seed");
  bench_cmd->add_option("--format", bench.format, "csv|markdown");
  bench_cmd->add_option("--out", bench.out_path, "output path (default stdout)");
  bench_cmd->add_option("--threads", bench.threads, "worker threads (0 = all cores)");
  bench_cmd->add_option("--kappa-grid", bench.kappa_points, "kappa grid points");
  bench_cmd->add_option("--restarts", bench.restarts, "optimizer restarts per kappa");
  bench_cmd->add_option("--knn-k", bench.knn_k, "plugin-knn neighborhood size (0 = auto)");
  bench_cmd->add_option("--eta-grid", bench.eta_grid, "eta grid for it-doolr");
  bench_cmd->add_option("--cv-folds", bench.cv_folds, "cross-validation folds for it-doolr");

  std::vector<const char*> argv;
  argv.push_back("ppvrule");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (*fit_cmd) return do_fit(fit, out);
    if (*eval_cmd) return do_evaluate(ev, out);
    if (*sim_cmd) return do_simulate(sim);
    if (*bench_cmd) return do_bench(bench, out);
    err << "no subcommand given\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ppvrule
