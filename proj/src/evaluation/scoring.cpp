#include "relnov/evaluation/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <thread>

namespace relnov {
namespace {

// Test samples scored per forward pass; fixed so results do not depend on
// the thread count.
constexpr std::size_t kScoreChunk = 64;

void require_multi_class(const PrototypeSet& prototypes) {
  if (prototypes.size() < 2) {
    throw ConfigError("normality score needs at least two known classes, got " +
                      std::to_string(prototypes.size()));
  }
}

void score_chunk(const Tensor<float>& features, std::size_t begin, std::size_t end,
                 const PrototypeSet& prototypes, const RelationalModel<float>& model,
                 std::vector<NormalityResult>& out) {
  const std::size_t classes = prototypes.size();
  const std::size_t d = features.cols();
  const std::size_t rows = (end - begin) * classes;
  Tensor<float> protos({rows, d}), tests({rows, d});
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t r = (i - begin) * classes + c;
      std::copy_n(prototypes.prototypes.storage().data() + c * d, d, protos.storage().data() + r * d);
      std::copy_n(features.storage().data() + i * d, d, tests.storage().data() + r * d);
    }
  }
  const Tensor<float> logits = pair_logits(model, protos, tests);
  std::vector<double> u(classes);
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t c = 0; c < classes; ++c) u[c] = logits[(i - begin) * classes + c];
    out[i] = max_softmax(u, prototypes.class_ids);
  }
}

}  // namespace

PrototypeSet compute_prototypes(const Tensor<float>& features, std::span<const std::int64_t> labels) {
  if (features.rank() != 2 || features.dim(0) == 0) throw DataError("compute_prototypes: empty support set");
  if (labels.size() != features.dim(0)) throw DataError("compute_prototypes: labels do not match rows");
  const std::size_t d = features.dim(1);
  std::map<std::int64_t, std::pair<std::vector<double>, std::size_t>> sums;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [sum, count] = sums[labels[i]];
    if (sum.empty()) sum.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) sum[c] += features.at(i, c);
    ++count;
  }
  PrototypeSet out;
  out.prototypes = Tensor<float>({sums.size(), d});
  std::size_t row = 0;
  for (const auto& [label, entry] : sums) {
    out.class_ids.push_back(label);
    for (std::size_t c = 0; c < d; ++c) {
      out.prototypes.at(row, c) = static_cast<float>(entry.first[c] / static_cast<double>(entry.second));
    }
    ++row;
  }
  return out;
}

PrototypeSet compute_prototypes(const LabeledDataset& support, const RelationalModel<float>& model) {
  support.validate();
  if (!support.has_labels()) throw DataError("compute_prototypes: support set has no labels");
  return compute_prototypes(extract_features(model, support.features), support.labels);
}

NormalityResult max_softmax(std::span<const double> similarities, std::span<const std::int64_t> class_ids) {
  if (similarities.size() < 2) {
    throw ConfigError("softmax over fewer than two classes is degenerate");
  }
  const double mx = *std::max_element(similarities.begin(), similarities.end());
  double total = 0;
  std::size_t best = 0;
  for (std::size_t c = 0; c < similarities.size(); ++c) {
    if (!std::isfinite(similarities[c])) throw NumericError("normality score: non-finite similarity");
    total += std::exp(similarities[c] - mx);
    if (similarities[c] > similarities[best]) best = c;
  }
  const double score = std::exp(similarities[best] - mx) / total;
  return {std::clamp(score, 0.0, 1.0), class_ids[best]};
}

NormalityResult normality_score(std::span<const float> z_t, const PrototypeSet& prototypes,
                                const RelationalModel<float>& model) {
  Tensor<float> row({1, z_t.size()}, std::vector<float>(z_t.begin(), z_t.end()));
  return normality_scores(row, prototypes, model).front();
}

std::vector<NormalityResult> normality_scores(const Tensor<float>& features,
                                              const PrototypeSet& prototypes,
                                              const RelationalModel<float>& model,
                                              std::size_t threads) {
  require_multi_class(prototypes);
  if (features.cols() != prototypes.prototypes.cols()) {
    throw DimensionError("normality score: test features have " + std::to_string(features.cols()) +
                         " columns, prototypes " + std::to_string(prototypes.prototypes.cols()));
  }
  const std::size_t n = features.rows();
  std::vector<NormalityResult> out(n);
  const std::size_t chunks = (n + kScoreChunk - 1) / kScoreChunk;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(chunks, 1));
  auto worker = [&](std::size_t first_chunk) {
    for (std::size_t c = first_chunk; c < chunks; c += threads) {
      score_chunk(features, c * kScoreChunk, std::min(n, (c + 1) * kScoreChunk), prototypes, model, out);
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          worker(t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return out;
}

std::string_view to_string(BaselineMetric metric) {
  return metric == BaselineMetric::cosine ? "cosine" : "inv_euclidean";
}

BaselineMetric parse_baseline_metric(std::string_view text) {
  if (text == "cosine") return BaselineMetric::cosine;
  if (text == "inv_euclidean") return BaselineMetric::inv_euclidean;
  throw ConfigError("unknown baseline metric '" + std::string(text) + "'");
}

double inv_euclidean_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("inv_euclidean: length mismatch");
  double dist = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    dist += diff * diff;
  }
  return 1.0 / (1.0 + std::sqrt(dist));
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine similarity of a zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

NormalityResult baseline_score(std::span<const float> z_t, const PrototypeSet& prototypes,
                               BaselineMetric metric) {
  require_multi_class(prototypes);
  const std::size_t d = prototypes.prototypes.cols();
  if (z_t.size() != d) throw DimensionError("baseline score: feature length mismatch");
  std::vector<double> sims(prototypes.size());
  for (std::size_t c = 0; c < prototypes.size(); ++c) {
    std::span<const float> proto(prototypes.prototypes.storage().data() + c * d, d);
    sims[c] = metric == BaselineMetric::cosine ? cosine_similarity(z_t, proto)
                                               : inv_euclidean_similarity(z_t, proto);
  }
  return max_softmax(sims, prototypes.class_ids);
}

}  // namespace relnov
