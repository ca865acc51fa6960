#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "relnov/evaluation/scores.hpp"

namespace relnov {

// Known samples are the positive class throughout: a higher score means
// "more normal".

// Mann-Whitney estimate: fraction of (known, unknown) pairs where the known
// score is higher, ties counted as one half.
double auroc(std::span<const double> known, std::span<const double> unknown);
double auroc(const ScoreSet& scores);

// Largest t with #{known >= t} >= 0.95 * n_known.
double fpr95_threshold(std::span<const double> known);

// Fraction of unknown scores >= fpr95_threshold(known).
double fpr95(std::span<const double> known, std::span<const double> unknown);
double fpr95(const ScoreSet& scores);

struct RocPoint {
  double fpr;
  double tpr;
};

// Step points from (0,0) to (1,1), one per distinct score, sweeping the
// threshold downward.
std::vector<RocPoint> roc_curve(std::span<const double> known, std::span<const double> unknown);

double trapezoid_area(const std::vector<RocPoint>& curve);

// 2ab / (a + b); zero when both are zero.
double h_score(double acc_known, double acc_unknown);

// Splits scores by the known flag; throws MetricError unless both sides are non-empty.
std::pair<std::vector<double>, std::vector<double>> split_known(const ScoreSet& scores);

}  // namespace relnov
