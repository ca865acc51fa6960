#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relnov/data/dataset.hpp"
#include "relnov/evaluation/metrics.hpp"
#include "relnov/evaluation/scores.hpp"
#include "relnov/evaluation/scoring.hpp"
#include "relnov/model/relational_model.hpp"

namespace relnov {

struct MetricsReport {
  double auroc = 0;
  double fpr95 = 0;
  std::optional<double> acc;      // known-class accuracy; absent without class labels
  std::optional<double> h_score;  // absent whenever acc is
  std::size_t n_known = 0;
  std::size_t n_unknown = 0;
  std::uint64_t seed = 0;
  std::string config_digest;
  double threshold = 0;  // FPR95 threshold, also used for unknown-detection accuracy
  std::vector<RocPoint> roc_points;
};

// Flat JSON object with exactly auroc, fpr95, acc, h_score, n_known,
// n_unknown, seed, config_digest (acc and h_score may be null).
std::string to_json(const MetricsReport& report);
void write_metrics_json(const MetricsReport& report, const std::filesystem::path& path);
// CSV with header fpr,tpr.
void write_roc_csv(const MetricsReport& report, std::ostream& out);

// 16-hex-digit FNV-1a digest of arbitrary text (the resolved config).
std::string config_digest(std::string_view text);

// Metrics from a score set. acc is argmax-prototype accuracy over known
// samples when true classes are present; unknown-detection accuracy is the
// fraction of unknowns scored below the FPR95 threshold.
MetricsReport compute_metrics(const ScoreSet& scores, std::uint64_t seed = 0,
                              std::string digest = {});

enum class ScoringMethod : std::uint8_t { relational, inv_euclidean, cosine };
std::string_view to_string(ScoringMethod method);
ScoringMethod parse_scoring_method(std::string_view text);

struct EvaluateOptions {
  ScoringMethod method = ScoringMethod::relational;
  // Required for relational scoring; for baselines it supplies f_theta
  // features, otherwise the raw support/test rows are compared directly.
  const RelationalModel<float>* model = nullptr;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
  std::string config_digest;
};

struct Evaluation {
  ScoreSet scores;
  MetricsReport report;
};

// Prototypes from the support set, one normality score per test sample,
// then metrics. A test sample is "known" when its class appears in the support set.
Evaluation evaluate(const LabeledDataset& support, const LabeledDataset& test,
                    const EvaluateOptions& options);

// Which input supplies the ensembled class predictions. `symmetric` keeps
// agreeing predictions and otherwise takes the one from the input with the
// higher (possibly normalized) score, lower class id on ties, so that
// ensemble_average(a, b) == ensemble_average(b, a).
enum class EnsemblePredictions : std::uint8_t { symmetric, first, second };

// Elementwise mean of two aligned score sets. With `normalize`, each set is
// min-max scaled first.
ScoreSet ensemble_average(const ScoreSet& a, const ScoreSet& b, bool normalize = false,
                          EnsemblePredictions predictions = EnsemblePredictions::symmetric);

}  // namespace relnov
