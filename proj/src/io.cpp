#include "ppvrule/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ppvrule {

namespace {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, res.ptr);
}

double parse_cell(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s.empty()) throw std::invalid_argument("missing value in " + context);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::invalid_argument("non-numeric cell '" + std::string(s) + "' in " + context);
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite cell in " + context);
  return v;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::invalid_argument("column not found: " + name);
  return static_cast<std::size_t>(it - columns.begin());
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty csv: " + path);
  table.columns = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.columns.size())
      throw std::invalid_argument("row " + std::to_string(lineno) + " has " +
                                  std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(table.columns.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j)
      row.push_back(parse_cell(cells[j], "row " + std::to_string(lineno) + " column " +
                                             table.columns[j]));
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_dataset_csv(const std::string& path, const Dataset& data,
                       const ExternalRule* external) {
  if (external && external->values.size() != data.size())
    throw std::invalid_argument("external signal count does not match dataset");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  for (std::size_t j = 0; j < data.feature_names.size(); ++j) out << data.feature_names[j] << ',';
  out << 'D';
  if (external) out << ",external";
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    for (double v : s.features) out << format_double(v) << ',';
    out << s.label;
    if (external) out << ',' << format_double(external->values[i]);
    out << '\n';
  }
}

Dataset dataset_from_csv(const CsvTable& table, const std::string& label_col,
                         const std::vector<std::string>& feature_cols, SamplingDesign design) {
  if (feature_cols.empty()) throw std::invalid_argument("no feature columns selected");
  std::size_t label_idx = table.column_index(label_col);
  std::vector<std::size_t> feat_idx;
  for (const auto& c : feature_cols) feat_idx.push_back(table.column_index(c));

  std::vector<LabeledSample> samples;
  samples.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    LabeledSample s;
    double y = row[label_idx];
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("label column must contain 0/1");
    s.label = static_cast<int>(y);
    s.features.reserve(feat_idx.size());
    for (std::size_t j : feat_idx) s.features.push_back(row[j]);
    samples.push_back(std::move(s));
  }
  return make_dataset(std::move(samples), feature_cols, design);
}

ExternalRule external_from_csv(const CsvTable& table, const std::string& column,
                               ExternalMode mode) {
  std::size_t idx = table.column_index(column);
  ExternalRule ext;
  ext.mode = mode;
  ext.values.reserve(table.rows.size());
  for (const auto& row : table.rows) ext.values.push_back(row[idx]);
  if (mode == ExternalMode::Decision)
    for (double& v : ext.values) {
      if (v != 1.0 && v != -1.0)
        throw std::invalid_argument("decision-mode external column must contain +1/-1");
    }
  ext.validate();
  return ext;
}

namespace {

using nlohmann::json;

double finite_or_cap(double v) {
  if (std::isnan(v)) return 0.0;
  if (std::isinf(v)) return v > 0 ? 1e300 : -1e300;
  return v;
}

json metrics_to_json(const RuleMetrics& m) {
  return json{{"tpr", m.tpr}, {"fpr", m.fpr}, {"ppv", m.ppv}};
}

RuleMetrics metrics_from_json(const json& j) {
  return {j.at("tpr").get<double>(), j.at("fpr").get<double>(), j.at("ppv").get<double>()};
}

}  // namespace

std::string rule_document_to_json(const RuleDocument& doc) {
  json j;
  j["schema_version"] = doc.schema_version;
  j["method"] = doc.method;
  j["feature_names"] = doc.feature_names;
  j["alpha"] = doc.alpha;
  j["prevalence"] = doc.prevalence;
  j["kappa_hat"] = doc.kappa_hat;
  j["lambda_hat"] = finite_or_cap(doc.lambda_hat);
  j["h"] = doc.h;
  if (doc.eta) j["eta"] = *doc.eta;
  j["feasible"] = doc.feasible;
  j["train_metrics"] = metrics_to_json(doc.train_metrics);
  j["fit_timestamp"] = doc.fit_timestamp;
  j["seed"] = doc.seed;
  if (doc.linear) {
    json lin;
    lin["intercept"] = doc.linear->intercept;
    lin["slopes"] = doc.linear->slopes;
    if (doc.linear->standardization) {
      lin["standardization"] = json{{"mean", doc.linear->standardization->mean},
                                    {"sd", doc.linear->standardization->sd}};
    }
    j["linear"] = std::move(lin);
  }
  if (doc.plugin) {
    json pl;
    pl["estimator"] = doc.plugin->estimator;
    pl["lr_threshold"] = finite_or_cap(doc.plugin->lr_threshold);
    if (doc.plugin->estimator == "logistic") {
      pl["intercept"] = doc.plugin->intercept;
      pl["slopes"] = doc.plugin->slopes;
    } else {
      pl["k"] = doc.plugin->k;
      pl["odds_factor"] = doc.plugin->odds_factor;
      pl["labels"] = doc.plugin->labels;
      pl["features"] = doc.plugin->features;
    }
    j["plugin"] = std::move(pl);
  }
  return j.dump(2) + "\n";
}

RuleDocument rule_document_from_json(const std::string& text) {
  json j = json::parse(text);
  RuleDocument doc;
  doc.schema_version = j.at("schema_version").get<int>();
  if (doc.schema_version != 1) throw std::invalid_argument("unsupported rule schema version");
  doc.method = j.at("method").get<std::string>();
  doc.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  doc.alpha = j.at("alpha").get<double>();
  doc.prevalence = j.at("prevalence").get<double>();
  doc.kappa_hat = j.at("kappa_hat").get<double>();
  doc.lambda_hat = j.at("lambda_hat").get<double>();
  doc.h = j.at("h").get<double>();
  if (j.contains("eta")) doc.eta = j.at("eta").get<double>();
  doc.feasible = j.at("feasible").get<bool>();
  doc.train_metrics = metrics_from_json(j.at("train_metrics"));
  doc.fit_timestamp = j.value("fit_timestamp", std::string());
  doc.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("linear")) {
    const json& lin = j.at("linear");
    LinearRule rule;
    rule.intercept = lin.at("intercept").get<double>();
    rule.slopes = lin.at("slopes").get<std::vector<double>>();
    if (lin.contains("standardization")) {
      FeatureScaling sc;
      sc.mean = lin.at("standardization").at("mean").get<std::vector<double>>();
      sc.sd = lin.at("standardization").at("sd").get<std::vector<double>>();
      rule.standardization = std::move(sc);
    }
    doc.linear = std::move(rule);
  }
  if (j.contains("plugin")) {
    const json& pl = j.at("plugin");
    RuleDocument::PluginPayload payload;
    payload.estimator = pl.at("estimator").get<std::string>();
    payload.lr_threshold = pl.at("lr_threshold").get<double>();
    if (payload.estimator == "logistic") {
      payload.intercept = pl.at("intercept").get<double>();
      payload.slopes = pl.at("slopes").get<std::vector<double>>();
    } else if (payload.estimator == "knn") {
      payload.k = pl.at("k").get<std::size_t>();
      payload.odds_factor = pl.at("odds_factor").get<double>();
      payload.labels = pl.at("labels").get<std::vector<int>>();
      payload.features = pl.at("features").get<std::vector<std::vector<double>>>();
    } else {
      throw std::invalid_argument("unknown plugin estimator: " + payload.estimator);
    }
    doc.plugin = std::move(payload);
  }
  if (!doc.linear && !doc.plugin)
    throw std::invalid_argument("rule document carries neither linear nor plugin payload");
  return doc;
}

void save_rule_document(const std::string& path, const RuleDocument& doc) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << rule_document_to_json(doc);
}

RuleDocument load_rule_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return rule_document_from_json(buf.str());
}

std::function<int(const std::vector<double>&)> make_decider(const RuleDocument& doc) {
  if (doc.linear) {
    LinearRule rule = *doc.linear;
    return [rule](const std::vector<double>& x) { return rule.decide(x); };
  }
  const auto& pl = *doc.plugin;
  PrevalenceSpec prev(doc.prevalence);
  auto rule = std::make_shared<PluginRule>();
  rule->lambda_hat = doc.lambda_hat;
  rule->lr_threshold = pl.lr_threshold;
  rule->alpha = doc.alpha;
  rule->p1 = prev.p1;
  if (pl.estimator == "logistic") {
    LogisticFit fit;
    fit.intercept = pl.intercept;
    fit.slopes = pl.slopes;
    fit.converged = true;
    rule->risk = std::make_shared<LogisticRiskModel>(std::move(fit));
  } else {
    rule->risk = std::make_shared<KnnRiskModel>(pl.features, pl.labels, pl.k, pl.odds_factor);
  }
  return [rule](const std::vector<double>& x) { return rule->decide(x); };
}

}  // namespace ppvrule
