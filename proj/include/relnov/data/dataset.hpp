#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relnov/numerics/tensor.hpp"

namespace relnov {

// Feature rows with per-sample class and domain ids. Either id vector may be
// empty for unlabeled data; otherwise it has one entry per row.
struct LabeledDataset {
  Tensor<float> features;  // n x d
  std::vector<std::int64_t> labels;
  std::vector<std::int64_t> domain_ids;
  std::string name;

  std::size_t size() const { return features.rank() == 0 ? 0 : features.dim(0); }
  std::size_t dim() const { return features.rank() < 2 ? 0 : features.dim(1); }
  bool has_labels() const { return !labels.empty(); }
  bool has_domains() const { return !domain_ids.empty(); }

  // One past the largest class id.
  std::size_t num_classes() const;
  // Sorted distinct class ids.
  std::vector<std::int64_t> class_ids() const;

  // Throws DataError when an invariant is broken.
  void validate() const;

  // Rows selected by index, in the given order.
  LabeledDataset subset(const std::vector<std::size_t>& rows) const;

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.features == b.features && a.labels == b.labels && a.domain_ids == b.domain_ids;
  }
};

}  // namespace relnov
