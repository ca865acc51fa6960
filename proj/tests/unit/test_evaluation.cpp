#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "relnov/data/synthetic.hpp"
#include "relnov/evaluation/evaluate.hpp"
#include "relnov/evaluation/metrics.hpp"
#include "relnov/evaluation/scores.hpp"
#include "relnov/evaluation/scoring.hpp"
#include "test_util.hpp"

using namespace relnov;

namespace {

double brute_auroc(const std::vector<double>& known, const std::vector<double>& unknown) {
  double credit = 0;
  for (double k : known) {
    for (double u : unknown) credit += k > u ? 1.0 : (k == u ? 0.5 : 0.0);
  }
  return credit / (static_cast<double>(known.size()) * static_cast<double>(unknown.size()));
}

double brute_fpr95(const std::vector<double>& known, const std::vector<double>& unknown) {
  std::set<double> candidates(known.begin(), known.end());
  candidates.insert(unknown.begin(), unknown.end());
  double best = -INFINITY;
  for (double t : candidates) {
    const double tpr = static_cast<double>(std::count_if(known.begin(), known.end(), [&](double k) { return k >= t; })) /
                       static_cast<double>(known.size());
    if (tpr >= 0.95) best = std::max(best, t);
  }
  return static_cast<double>(std::count_if(unknown.begin(), unknown.end(), [&](double u) { return u >= best; })) /
         static_cast<double>(unknown.size());
}

// Scores on a coarse grid so that ties are frequent.
std::vector<double> random_scores(std::mt19937_64& rng, std::size_t n, int grid) {
  std::vector<double> out(n);
  for (auto& v : out) v = static_cast<double>(rng() % static_cast<std::uint64_t>(grid)) / grid;
  return out;
}

ScoreSet make_scores(const std::vector<double>& known, const std::vector<double>& unknown) {
  ScoreSet s;
  for (double k : known) {
    s.sample_ids.push_back(static_cast<std::int64_t>(s.size()));
    s.scores.push_back(k);
    s.is_known.push_back(1);
    s.pred_class.push_back(0);
  }
  for (double u : unknown) {
    s.sample_ids.push_back(static_cast<std::int64_t>(s.size()));
    s.scores.push_back(u);
    s.is_known.push_back(0);
    s.pred_class.push_back(1);
  }
  return s;
}

RelationalModel<float> small_model(std::size_t input_dim) {
  ModelConfig cfg;
  cfg.input_dim = input_dim;
  cfg.feature_dim = 8;
  cfg.model_dim = 8;
  cfg.num_blocks = 1;
  cfg.num_heads = 2;
  cfg.mlp_ratio = 2;
  return RelationalModel<float>(cfg);
}

}  // namespace

TEST(Prototypes, MeansPerClass) {
  const auto features = Tensor<float>::matrix(3, 2, {{1, 2}, {3, 4}, {7, 7}});
  const std::vector<std::int64_t> labels{4, 4, 9};
  const auto protos = compute_prototypes(features, labels);
  EXPECT_EQ(protos.class_ids, (std::vector<std::int64_t>{4, 9}));
  EXPECT_EQ(protos.prototypes, Tensor<float>::matrix(2, 2, {{2, 3}, {7, 7}}));
}

TEST(Prototypes, DuplicatedDatasetSamePrototypes) {
  std::mt19937_64 rng(1);
  const auto features = relnov::testing::random_tensor<float>({6, 3}, rng);
  const std::vector<std::int64_t> labels{0, 1, 0, 1, 2, 2};
  Tensor<float> doubled({12, 3});
  std::vector<std::int64_t> doubled_labels;
  for (std::size_t r = 0; r < 12; ++r) {
    for (std::size_t c = 0; c < 3; ++c) doubled.at(r, c) = features.at(r % 6, c);
    doubled_labels.push_back(labels[r % 6]);
  }
  const auto a = compute_prototypes(features, labels);
  const auto b = compute_prototypes(doubled, doubled_labels);
  for (std::size_t i = 0; i < a.prototypes.size(); ++i) {
    EXPECT_NEAR(a.prototypes[i], b.prototypes[i], 1e-6);
  }
}

TEST(Prototypes, EmptySupportIsDataError) {
  EXPECT_THROW(compute_prototypes(Tensor<float>({0, 3}), std::vector<std::int64_t>{}), DataError);
}

TEST(MaxSoftmax, UniformAndDominant) {
  const std::vector<std::int64_t> ids{0, 1, 2, 3};
  const std::vector<double> uniform{0.3, 0.3, 0.3, 0.3};
  EXPECT_NEAR(max_softmax(uniform, ids).score, 0.25, 1e-15);
  const std::vector<double> dominant{0, 800, 0, 0};
  const auto r = max_softmax(dominant, ids);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_EQ(r.cls, 1);
}

TEST(MaxSoftmax, FewerThanTwoClassesIsConfigError) {
  const std::vector<std::int64_t> ids{0};
  const std::vector<double> u{1};
  EXPECT_THROW(max_softmax(u, ids), ConfigError);
}

TEST(MaxSoftmax, ShiftAndTemperatureProperties) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0, 3);
  const std::vector<std::int64_t> ids{5, 6, 7, 8, 9};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> u(5), shifted(5), scaled(5);
    const double shift = normal(rng);
    const double temperature = 0.1 + std::abs(normal(rng));
    for (std::size_t i = 0; i < 5; ++i) {
      u[i] = normal(rng);
      shifted[i] = u[i] + shift;
      scaled[i] = u[i] / temperature;
    }
    const auto base = max_softmax(u, ids);
    EXPECT_GE(base.score, 0.2 - 1e-15);
    EXPECT_LE(base.score, 1.0);
    EXPECT_NEAR(max_softmax(shifted, ids).score, base.score, 1e-12);
    EXPECT_EQ(max_softmax(shifted, ids).cls, base.cls);
    EXPECT_EQ(max_softmax(scaled, ids).cls, base.cls);
  }
}

TEST(Baselines, SimilarityExamples) {
  const std::vector<float> a{1, 0}, b{0, 1}, c{2, 0};
  EXPECT_EQ(inv_euclidean_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(inv_euclidean_similarity(a, std::vector<float>{1, 1}), 0.5);
  EXPECT_EQ(cosine_similarity(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, c), 1.0);
  const std::vector<float> zero{0, 0};
  EXPECT_THROW(cosine_similarity(a, zero), NumericError);
}

TEST(Baselines, ScoreUsesMsp) {
  PrototypeSet protos;
  protos.class_ids = {3, 7};
  protos.prototypes = Tensor<float>::matrix(2, 2, {{0, 0}, {3, 4}});
  const std::vector<float> z{0, 0};
  const auto r = baseline_score(z, protos, BaselineMetric::inv_euclidean);
  // Similarities 1 and 1/6.
  const double expected = std::exp(1.0) / (std::exp(1.0) + std::exp(1.0 / 6.0));
  EXPECT_NEAR(r.score, expected, 1e-12);
  EXPECT_EQ(r.cls, 3);
}

TEST(NormalityScore, MatchesManualPairLogits) {
  const auto model = small_model(4);
  std::mt19937_64 rng(3);
  const auto feats = relnov::testing::random_tensor<float>({9, 8}, rng);
  const std::vector<std::int64_t> labels{0, 0, 0, 1, 1, 1, 2, 2, 2};
  const auto protos = compute_prototypes(feats, labels);
  const std::vector<float> z(feats.data().begin(), feats.data().begin() + 8);
  const auto r = normality_score(z, protos, model);
  Tensor<float> tiled({3, 8});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t k = 0; k < 8; ++k) tiled.at(c, k) = z[k];
  }
  const auto u = pair_logits(model, protos.prototypes, tiled);
  std::vector<double> ud(u.data().begin(), u.data().end());
  const auto expected = max_softmax(ud, protos.class_ids);
  EXPECT_NEAR(r.score, expected.score, 1e-6);
  EXPECT_EQ(r.cls, expected.cls);
}

TEST(NormalityScore, ThreadCountDoesNotChangeResults) {
  const auto model = small_model(4);
  std::mt19937_64 rng(4);
  const auto feats = relnov::testing::random_tensor<float>({300, 8}, rng);
  std::vector<std::int64_t> labels(300);
  for (std::size_t i = 0; i < 300; ++i) labels[i] = static_cast<std::int64_t>(i % 4);
  const auto protos = compute_prototypes(feats, labels);
  const auto one = normality_scores(feats, protos, model, 1);
  const auto four = normality_scores(feats, protos, model, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].score, four[i].score);
    EXPECT_EQ(one[i].cls, four[i].cls);
  }
}

TEST(Auroc, Examples) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8}, std::vector<double>{0.3, 0.2}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.3, 0.2}, std::vector<double>{0.9, 0.8}), 0.0);
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.6}), 0.5);
}

TEST(Auroc, SingleSidedIsMetricError) {
  EXPECT_THROW(auroc(std::vector<double>{0.5}, std::vector<double>{}), MetricError);
  EXPECT_THROW(auroc(make_scores({0.1, 0.2}, {})), MetricError);
}

TEST(Auroc, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nk = 1 + rng() % 100, nu = 1 + rng() % 100;
    const int grid = 2 + static_cast<int>(rng() % 30);
    const auto known = random_scores(rng, nk, grid);
    const auto unknown = random_scores(rng, nu, grid);
    EXPECT_NEAR(auroc(known, unknown), brute_auroc(known, unknown), 1e-12);
    EXPECT_NEAR(trapezoid_area(roc_curve(known, unknown)), brute_auroc(known, unknown), 1e-9);
  }
}

TEST(Auroc, MonotoneTransformInvariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto known = random_scores(rng, 60, 40);
    const auto unknown = random_scores(rng, 70, 40);
    auto tk = known, tu = unknown;
    for (auto* v : {&tk, &tu}) {
      for (auto& x : *v) x = std::pow(x, 3) * 0.5 + 0.25;
    }
    EXPECT_EQ(auroc(known, unknown), auroc(tk, tu));
    auto sk = known, su = unknown;
    for (auto& x : sk) x += 0.125;
    for (auto& x : su) x += 0.125;
    EXPECT_EQ(auroc(known, unknown), auroc(sk, su));
    EXPECT_EQ(fpr95(known, unknown), fpr95(sk, su));
  }
}

TEST(Fpr95, Examples) {
  EXPECT_EQ(fpr95(std::vector<double>{0.9, 0.8}, std::vector<double>{0.3, 0.2}), 0.0);
  EXPECT_EQ(fpr95(std::vector<double>{0.2, 0.3}, std::vector<double>{0.8, 0.9}), 1.0);
}

TEST(Fpr95, EvenlySpacedMatchesSweep) {
  std::vector<double> known, unknown;
  for (int i = 1; i <= 100; ++i) {
    known.push_back(0.5 + 0.5 * i / 100.0);
    unknown.push_back(0.6 * i / 100.0);
  }
  const double expected = brute_fpr95(known, unknown);
  EXPECT_NEAR(fpr95(known, unknown), expected, 1e-12);
  // 95 of 100 known scores lie at or above 0.53, and unknowns from 0.534 up pass it.
  EXPECT_NEAR(expected, 0.12, 1e-12);
}

TEST(Fpr95, MatchesSweepOracleWithTies) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nk = 1 + rng() % 100, nu = 1 + rng() % 100;
    const int grid = 2 + static_cast<int>(rng() % 30);
    const auto known = random_scores(rng, nk, grid);
    const auto unknown = random_scores(rng, nu, grid);
    EXPECT_NEAR(fpr95(known, unknown), brute_fpr95(known, unknown), 1e-12);
  }
}

TEST(Roc, MonotoneFromOriginToOne) {
  std::mt19937_64 rng(8);
  const auto known = random_scores(rng, 50, 10);
  const auto unknown = random_scores(rng, 40, 10);
  const auto curve = roc_curve(known, unknown);
  ASSERT_GE(curve.size(), 2u);
  EXPECT_EQ(curve.front().fpr, 0.0);
  EXPECT_EQ(curve.front().tpr, 0.0);
  EXPECT_EQ(curve.back().fpr, 1.0);
  EXPECT_EQ(curve.back().tpr, 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].fpr, curve[i - 1].fpr);
    EXPECT_GE(curve[i].tpr, curve[i - 1].tpr);
  }
}

TEST(HScore, Examples) {
  EXPECT_DOUBLE_EQ(h_score(0.5, 0.5), 0.5);
  EXPECT_EQ(h_score(0.0, 0.7), 0.0);
  EXPECT_EQ(h_score(0.0, 0.0), 0.0);
  EXPECT_NEAR(h_score(0.6, 0.4), 0.48, 1e-15);
}

TEST(Ensemble, MeanIdempotentCommutative) {
  auto a = make_scores({0.8, 0.4}, {0.1});
  auto b = make_scores({0.6, 0.2}, {0.5});
  b.pred_class = {0, 2, 1};
  const auto ab = ensemble_average(a, b);
  EXPECT_NEAR(ab.scores[0], 0.7, 1e-15);
  EXPECT_NEAR(ab.scores[2], 0.3, 1e-15);
  const auto ba = ensemble_average(b, a);
  EXPECT_EQ(ab.scores, ba.scores);
  EXPECT_EQ(ab.pred_class, ba.pred_class);
  const auto aa = ensemble_average(a, a);
  EXPECT_EQ(aa.scores, a.scores);
  EXPECT_EQ(aa.pred_class, a.pred_class);
}

TEST(Ensemble, NormalizeAndPredictionSource) {
  auto a = make_scores({0.8, 0.4}, {0.2});
  auto b = make_scores({0.3, 0.3}, {0.3});
  b.pred_class = {5, 5, 5};
  const auto n = ensemble_average(a, b, true);
  EXPECT_NEAR(n.scores[0], (1.0 + 0.5) / 2, 1e-15);
  EXPECT_NEAR(n.scores[2], (0.0 + 0.5) / 2, 1e-15);
  EXPECT_EQ(ensemble_average(a, b, false, EnsemblePredictions::first).pred_class, a.pred_class);
  EXPECT_EQ(ensemble_average(a, b, false, EnsemblePredictions::second).pred_class, b.pred_class);
}

TEST(Ensemble, Mismatches) {
  const auto a = make_scores({0.8, 0.4}, {0.2});
  EXPECT_THROW(ensemble_average(a, make_scores({0.8}, {0.2})), DataError);
  auto flipped = a;
  flipped.is_known[0] = 0;
  EXPECT_THROW(ensemble_average(a, flipped), DataError);
}

TEST(Ensemble, ComplementaryScorersDoNotLoseAuroc) {
  // Each scorer ranks one half of the unknowns perfectly below the knowns and
  // puts the other half on top.
  std::vector<double> known(20), ua(20), ub(20);
  for (int i = 0; i < 20; ++i) known[i] = 0.6 + 0.01 * i;
  std::vector<double> unknown_a, unknown_b;
  for (int i = 0; i < 20; ++i) {
    const bool first_half = i < 10;
    unknown_a.push_back(first_half ? 0.1 + 0.01 * i : 0.9 + 0.005 * i);
    unknown_b.push_back(first_half ? 0.9 + 0.005 * i : 0.1 + 0.01 * i);
  }
  const auto a = make_scores(known, unknown_a);
  const auto b = make_scores(known, unknown_b);
  const auto merged = ensemble_average(a, b);
  const double best = std::max(auroc(a), auroc(b));
  const auto [mk, mu] = split_known(merged);
  EXPECT_NEAR(auroc(merged), brute_auroc(mk, mu), 1e-12);
  EXPECT_GE(auroc(merged), best);
}

TEST(ScoresCsv, RoundTripAndValidation) {
  auto s = make_scores({0.8, 0.4}, {0.123456789012345});
  std::stringstream buf;
  write_scores_csv(s, buf);
  EXPECT_TRUE(buf.str().starts_with("sample_id,score,is_known,pred_class\n"));
  const auto back = read_scores_csv(buf);
  EXPECT_EQ(back.scores, s.scores);
  EXPECT_EQ(back.is_known, s.is_known);
  EXPECT_EQ(back.pred_class, s.pred_class);
  s.scores[0] = 1.5;
  EXPECT_THROW(s.validate(), DataError);
  std::istringstream bad("sample_id,score,is_known,pred_class\n0,abc,1,0\n");
  EXPECT_THROW(read_scores_csv(bad), Error);
}

TEST(MetricsReport, JsonHasExactKeys) {
  const auto report = compute_metrics(make_scores({0.8, 0.4}, {0.1}), 3, "abc");
  const auto j = nlohmann::json::parse(to_json(report));
  std::set<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
  EXPECT_EQ(keys, (std::set<std::string>{"auroc", "fpr95", "acc", "h_score", "n_known", "n_unknown", "seed",
                                         "config_digest"}));
  EXPECT_TRUE(j["acc"].is_null());
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["n_known"], 2);
}

TEST(ConfigDigest, StableHex) {
  EXPECT_EQ(config_digest(""), "cbf29ce484222325");
  EXPECT_EQ(config_digest("a").size(), 16u);
  EXPECT_NE(config_digest("a"), config_digest("b"));
}

TEST(Evaluate, NoUnknownsIsMetricError) {
  auto data = generate_synthetic(SyntheticSpec{});
  EvaluateOptions opts;
  opts.method = ScoringMethod::cosine;
  EXPECT_THROW(evaluate(data.support, data.support, opts), MetricError);
}

TEST(Evaluate, RandomModelRandomDataIsNearChance) {
  std::mt19937_64 rng(9);
  LabeledDataset support, test;
  support.features = relnov::testing::random_tensor<float>({200, 4}, rng);
  test.features = relnov::testing::random_tensor<float>({600, 4}, rng);
  for (std::size_t i = 0; i < 200; ++i) support.labels.push_back(static_cast<std::int64_t>(i % 4));
  for (std::size_t i = 0; i < 600; ++i) test.labels.push_back(static_cast<std::int64_t>(i % 8));
  const auto model = small_model(4);
  EvaluateOptions opts;
  opts.model = &model;
  const auto report = evaluate(support, test, opts).report;
  EXPECT_NEAR(report.auroc, 0.5, 0.1);
  EXPECT_EQ(report.n_known, 300u);
  EXPECT_EQ(report.n_unknown, 300u);
}

TEST(Evaluate, DeterministicReport) {
  auto data = generate_synthetic(SyntheticSpec{});
  const auto model = small_model(16);
  EvaluateOptions opts;
  opts.model = &model;
  opts.threads = 3;
  opts.seed = 4;
  const auto a = to_json(evaluate(data.support, data.test, opts).report);
  opts.threads = 1;
  const auto b = to_json(evaluate(data.support, data.test, opts).report);
  EXPECT_EQ(a, b);
}

TEST(Evaluate, BaselinesOnSeparableData) {
  auto data = generate_synthetic(SyntheticSpec{});
  for (auto method : {ScoringMethod::inv_euclidean, ScoringMethod::cosine}) {
    EvaluateOptions opts;
    opts.method = method;
    const auto r = evaluate(data.support, data.test, opts).report;
    EXPECT_GT(r.auroc, 0.9) << to_string(method);
    ASSERT_TRUE(r.acc.has_value());
    EXPECT_GT(*r.acc, 0.9);
  }
}

TEST(Evaluate, DimensionMismatch) {
  auto data = generate_synthetic(SyntheticSpec{});
  const auto model = small_model(5);
  EvaluateOptions opts;
  opts.model = &model;
  EXPECT_THROW(evaluate(data.support, data.test, opts), DimensionError);
  EvaluateOptions relational_without_model;
  EXPECT_THROW(evaluate(data.support, data.test, relational_without_model), ConfigError);
}
