#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ppvrule/plugin.hpp"
#include "ppvrule/types.hpp"

namespace ppvrule {

/// Raw numeric CSV contents (comma separator, header row, '.' decimals, LF).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;  // throws when absent
};

CsvTable read_csv(const std::string& path);

/// Writes a dataset (and optional external column) with shortest round-trip
/// number formatting, so re-reading reproduces the values exactly.
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const ExternalRule* external = nullptr);

/// Assembles a dataset from named columns; every cell must be numeric and the
/// label column must be 0/1.
Dataset dataset_from_csv(const CsvTable& table, const std::string& label_col,
                         const std::vector<std::string>& feature_cols, SamplingDesign design);

ExternalRule external_from_csv(const CsvTable& table, const std::string& column,
                               ExternalMode mode);

/// Persisted decision rule. Linear methods store coefficients (plus the
/// standardization they were fit under); plug-in methods store the risk model
/// payload and likelihood-ratio threshold so loading reproduces decisions
/// exactly.
struct RuleDocument {
  int schema_version = 1;
  std::string method;
  std::vector<std::string> feature_names;
  double alpha = 0.0;
  double prevalence = 0.0;
  double kappa_hat = 0.0;
  double lambda_hat = 0.0;
  double h = 0.0;
  std::optional<double> eta;
  bool feasible = true;
  RuleMetrics train_metrics;
  std::string fit_timestamp;
  std::uint64_t seed = 0;

  std::optional<LinearRule> linear;

  struct PluginPayload {
    std::string estimator;  // "logistic" | "knn"
    double lr_threshold = 0.0;
    // logistic payload
    double intercept = 0.0;
    std::vector<double> slopes;
    // knn payload
    std::size_t k = 0;
    double odds_factor = 1.0;
    std::vector<int> labels;
    std::vector<std::vector<double>> features;
  };
  std::optional<PluginPayload> plugin;
};

std::string rule_document_to_json(const RuleDocument& doc);
RuleDocument rule_document_from_json(const std::string& text);
void save_rule_document(const std::string& path, const RuleDocument& doc);
RuleDocument load_rule_document(const std::string& path);

/// Builds the decision function encoded by a document.
std::function<int(const std::vector<double>&)> make_decider(const RuleDocument& doc);

}  // namespace ppvrule
