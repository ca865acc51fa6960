#include "relnov/evaluation/metrics.hpp"

#include <algorithm>
#include <string>

#include "relnov/errors.hpp"

namespace relnov {
namespace {

void require_both(std::size_t known, std::size_t unknown) {
  if (known == 0 || unknown == 0) {
    throw MetricError("metric needs at least one known and one unknown sample (got " +
                      std::to_string(known) + " known, " + std::to_string(unknown) + " unknown)");
  }
}

}  // namespace

std::pair<std::vector<double>, std::vector<double>> split_known(const ScoreSet& scores) {
  scores.validate();
  std::vector<double> known, unknown;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (scores.is_known[i] ? known : unknown).push_back(scores.scores[i]);
  }
  require_both(known.size(), unknown.size());
  return {std::move(known), std::move(unknown)};
}

double auroc(std::span<const double> known, std::span<const double> unknown) {
  require_both(known.size(), unknown.size());
  struct Entry {
    double score;
    bool known;
  };
  std::vector<Entry> all;
  all.reserve(known.size() + unknown.size());
  for (double s : known) all.push_back({s, true});
  for (double s : unknown) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

  // Twice the known rank sum with mid-ranks for ties keeps everything integral.
  long double rank_sum_x2 = 0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t known_in_group = 0;
    while (j < all.size() && all[j].score == all[i].score) {
      known_in_group += all[j].known ? 1 : 0;
      ++j;
    }
    // ranks i+1 .. j, mid-rank (i + 1 + j) / 2
    rank_sum_x2 += static_cast<long double>(known_in_group) * static_cast<long double>(i + 1 + j);
    i = j;
  }
  const long double n1 = static_cast<long double>(known.size());
  const long double n0 = static_cast<long double>(unknown.size());
  const long double u_x2 = rank_sum_x2 - n1 * (n1 + 1);
  return static_cast<double>(u_x2 / (2 * n1 * n0));
}

double auroc(const ScoreSet& scores) {
  const auto [known, unknown] = split_known(scores);
  return auroc(known, unknown);
}

double fpr95_threshold(std::span<const double> known) {
  if (known.empty()) throw MetricError("fpr95: no known samples");
  std::vector<double> sorted(known.begin(), known.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Smallest count k with 100 k >= 95 n; the k-th largest score is the threshold.
  const std::size_t n = sorted.size();
  const std::size_t k = (95 * n + 99) / 100;
  return sorted[std::max<std::size_t>(k, 1) - 1];
}

double fpr95(std::span<const double> known, std::span<const double> unknown) {
  require_both(known.size(), unknown.size());
  const double t = fpr95_threshold(known);
  const auto above = std::count_if(unknown.begin(), unknown.end(), [t](double s) { return s >= t; });
  return static_cast<double>(above) / static_cast<double>(unknown.size());
}

double fpr95(const ScoreSet& scores) {
  const auto [known, unknown] = split_known(scores);
  return fpr95(known, unknown);
}

std::vector<RocPoint> roc_curve(std::span<const double> known, std::span<const double> unknown) {
  require_both(known.size(), unknown.size());
  std::vector<double> k(known.begin(), known.end()), u(unknown.begin(), unknown.end());
  std::sort(k.begin(), k.end(), std::greater<>());
  std::sort(u.begin(), u.end(), std::greater<>());
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t ik = 0, iu = 0;
  while (ik < k.size() || iu < u.size()) {
    const bool take_known = ik < k.size() && (iu >= u.size() || k[ik] >= u[iu]);
    const double t = take_known ? k[ik] : u[iu];
    while (ik < k.size() && k[ik] == t) ++ik;
    while (iu < u.size() && u[iu] == t) ++iu;
    curve.push_back({static_cast<double>(iu) / static_cast<double>(u.size()),
                     static_cast<double>(ik) / static_cast<double>(k.size())});
  }
  return curve;
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  }
  return area;
}

double h_score(double acc_known, double acc_unknown) {
  if (acc_known + acc_unknown == 0.0) return 0.0;
  return 2.0 * acc_known * acc_unknown / (acc_known + acc_unknown);
}

}  // namespace relnov
