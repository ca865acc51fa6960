#include "relnov/data/dataset.hpp"

#include <algorithm>
#include <string>

namespace relnov {

std::size_t LabeledDataset::num_classes() const {
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
}

std::vector<std::int64_t> LabeledDataset::class_ids() const {
  std::vector<std::int64_t> ids(labels);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void LabeledDataset::validate() const {
  if (features.rank() != 2) throw DataError("dataset '" + name + "': features must be a matrix");
  const std::size_t n = size();
  if (!labels.empty() && labels.size() != n) {
    throw DataError("dataset '" + name + "': " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(n) + " rows");
  }
  if (!domain_ids.empty() && domain_ids.size() != n) {
    throw DataError("dataset '" + name + "': " + std::to_string(domain_ids.size()) +
                    " domain ids for " + std::to_string(n) + " rows");
  }
  for (std::int64_t y : labels) {
    if (y < 0) throw DataError("dataset '" + name + "': negative class id");
  }
  if (!features.all_finite()) throw DataError("dataset '" + name + "': non-finite features");
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& rows) const {
  const std::size_t d = dim();
  LabeledDataset out;
  out.name = name;
  out.features = Tensor<float>({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(features.storage().data() + rows[i] * d, d, out.features.storage().data() + i * d);
    if (has_labels()) out.labels.push_back(labels[rows[i]]);
    if (has_domains()) out.domain_ids.push_back(domain_ids[rows[i]]);
  }
  return out;
}

}  // namespace relnov
