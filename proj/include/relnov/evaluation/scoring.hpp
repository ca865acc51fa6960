#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "relnov/data/dataset.hpp"
#include "relnov/model/relational_model.hpp"

namespace relnov {

struct PrototypeSet {
  std::vector<std::int64_t> class_ids;
  Tensor<float> prototypes;  // |class_ids| x d

  std::size_t size() const { return class_ids.size(); }
};

// Per-class mean of already-extracted feature rows.
PrototypeSet compute_prototypes(const Tensor<float>& features, std::span<const std::int64_t> labels);

// Per-class mean of f_theta(x) over the support set.
PrototypeSet compute_prototypes(const LabeledDataset& support, const RelationalModel<float>& model);

struct NormalityResult {
  double score;         // max softmax probability, in [1/|classes|, 1]
  std::int64_t cls;     // class id of the arg-max prototype
};

// MSP over a similarity vector; shared by relational and baseline scorers.
NormalityResult max_softmax(std::span<const double> similarities, std::span<const std::int64_t> class_ids);

// Softmax over the head logits of (prototype_c, z_t) pairs for every known class.
NormalityResult normality_score(std::span<const float> z_t, const PrototypeSet& prototypes,
                                const RelationalModel<float>& model);

// Batched form: one result per row of `features` (already passed through f_theta).
std::vector<NormalityResult> normality_scores(const Tensor<float>& features,
                                              const PrototypeSet& prototypes,
                                              const RelationalModel<float>& model,
                                              std::size_t threads = 1);

enum class BaselineMetric : std::uint8_t { inv_euclidean, cosine };

std::string_view to_string(BaselineMetric metric);
BaselineMetric parse_baseline_metric(std::string_view text);

// 1 / (1 + ||a - b||)
double inv_euclidean_similarity(std::span<const float> a, std::span<const float> b);
// a.b / (||a|| ||b||); NumericError when either norm is zero.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

NormalityResult baseline_score(std::span<const float> z_t, const PrototypeSet& prototypes,
                               BaselineMetric metric);

}  // namespace relnov
