#include "relnov/evaluation/evaluate.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace relnov {

std::string to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["auroc"] = report.auroc;
  j["fpr95"] = report.fpr95;
  j["acc"] = report.acc ? nlohmann::ordered_json(*report.acc) : nlohmann::ordered_json(nullptr);
  j["h_score"] = report.h_score ? nlohmann::ordered_json(*report.h_score) : nlohmann::ordered_json(nullptr);
  j["n_known"] = report.n_known;
  j["n_unknown"] = report.n_unknown;
  j["seed"] = report.seed;
  j["config_digest"] = report.config_digest;
  return j.dump(2) + "\n";
}

void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("metrics: cannot open " + path.string() + " for writing");
  out << to_json(report);
}

void write_roc_csv(const MetricsReport& report, std::ostream& out) {
  out << "fpr,tpr\n";
  for (const auto& p : report.roc_points) out << fmt::format("{},{}\n", p.fpr, p.tpr);
}

std::string config_digest(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return fmt::format("{:016x}", hash);
}

MetricsReport compute_metrics(const ScoreSet& scores, std::uint64_t seed, std::string digest) {
  const auto [known, unknown] = split_known(scores);
  MetricsReport report;
  report.auroc = auroc(known, unknown);
  report.threshold = fpr95_threshold(known);
  report.fpr95 = fpr95(known, unknown);
  report.roc_points = roc_curve(known, unknown);
  report.n_known = known.size();
  report.n_unknown = unknown.size();
  report.seed = seed;
  report.config_digest = std::move(digest);
  if (!scores.true_class.empty()) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores.is_known[i] && scores.pred_class[i] == scores.true_class[i]) ++correct;
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(known.size());
    report.acc = acc;
    report.h_score = h_score(acc, 1.0 - report.fpr95);
  }
  return report;
}

std::string_view to_string(ScoringMethod method) {
  switch (method) {
    case ScoringMethod::relational: return "relational";
    case ScoringMethod::inv_euclidean: return "inv_euclidean";
    case ScoringMethod::cosine: return "cosine";
  }
  return "unknown";
}

ScoringMethod parse_scoring_method(std::string_view text) {
  if (text == "relational") return ScoringMethod::relational;
  if (text == "inv_euclidean") return ScoringMethod::inv_euclidean;
  if (text == "cosine") return ScoringMethod::cosine;
  throw ConfigError("unknown metric '" + std::string(text) + "'");
}

Evaluation evaluate(const LabeledDataset& support, const LabeledDataset& test,
                    const EvaluateOptions& options) {
  support.validate();
  test.validate();
  if (!support.has_labels() || !test.has_labels()) {
    throw DataError("evaluate: support and test sets need class labels");
  }
  if (support.dim() != test.dim()) {
    throw DimensionError("evaluate: support has " + std::to_string(support.dim()) +
                         " features, test has " + std::to_string(test.dim()));
  }
  const RelationalModel<float>* model = options.model;
  if (options.method == ScoringMethod::relational && model == nullptr) {
    throw ConfigError("evaluate: relational scoring needs a model");
  }
  if (model != nullptr && model->config().input_dim != support.dim()) {
    throw DimensionError("evaluate: model expects " + std::to_string(model->config().input_dim) +
                         " input features, data has " + std::to_string(support.dim()));
  }

  const Tensor<float> support_z = model ? extract_features(*model, support.features) : support.features;
  const Tensor<float> test_z = model ? extract_features(*model, test.features) : test.features;
  const PrototypeSet prototypes = compute_prototypes(support_z, support.labels);

  std::vector<NormalityResult> results;
  if (options.method == ScoringMethod::relational) {
    results = normality_scores(test_z, prototypes, *model, options.threads);
  } else {
    const BaselineMetric metric = options.method == ScoringMethod::cosine ? BaselineMetric::cosine
                                                                          : BaselineMetric::inv_euclidean;
    const std::size_t d = test_z.cols();
    for (std::size_t i = 0; i < test_z.rows(); ++i) {
      results.push_back(baseline_score({test_z.storage().data() + i * d, d}, prototypes, metric));
    }
  }

  const std::set<std::int64_t> known_classes(prototypes.class_ids.begin(), prototypes.class_ids.end());
  Evaluation out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.scores.sample_ids.push_back(static_cast<std::int64_t>(i));
    out.scores.scores.push_back(results[i].score);
    out.scores.is_known.push_back(known_classes.contains(test.labels[i]) ? 1 : 0);
    out.scores.pred_class.push_back(results[i].cls);
    out.scores.true_class.push_back(test.labels[i]);
  }
  out.report = compute_metrics(out.scores, options.seed, options.config_digest);
  return out;
}

namespace {

std::vector<double> min_max(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.5);
  if (v.empty() || *hi == *lo) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
  return out;
}

}  // namespace

ScoreSet ensemble_average(const ScoreSet& a, const ScoreSet& b, bool normalize,
                          EnsemblePredictions predictions) {
  a.validate();
  b.validate();
  if (a.size() != b.size()) {
    throw DataError("ensemble: score sets have " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()) + " samples");
  }
  if (a.sample_ids != b.sample_ids) throw DataError("ensemble: sample ids are not aligned");
  if (a.is_known != b.is_known) throw DataError("ensemble: ground-truth flags disagree");
  const std::vector<double> sa = normalize ? min_max(a.scores) : a.scores;
  const std::vector<double> sb = normalize ? min_max(b.scores) : b.scores;
  if (!a.true_class.empty() && !b.true_class.empty() && a.true_class != b.true_class) {
    throw DataError("ensemble: true classes disagree");
  }
  ScoreSet out = predictions == EnsemblePredictions::second ? b : a;
  if (out.true_class.empty()) out.true_class = a.true_class.empty() ? b.true_class : a.true_class;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.scores[i] = (sa[i] + sb[i]) / 2.0;
    if (predictions == EnsemblePredictions::symmetric && a.pred_class[i] != b.pred_class[i]) {
      if (sa[i] != sb[i]) {
        out.pred_class[i] = sa[i] > sb[i] ? a.pred_class[i] : b.pred_class[i];
      } else {
        out.pred_class[i] = std::min(a.pred_class[i], b.pred_class[i]);
      }
    }
  }
  return out;
}

}  // namespace relnov
