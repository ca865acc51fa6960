#include "relnov/data/pairs.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace relnov {

std::vector<PairIndex> create_pairs(const LabeledDataset& dataset, std::mt19937_64& rng) {
  if (!dataset.has_labels()) throw DataError("create_pairs: dataset has no labels");
  const std::size_t n = dataset.size();
  std::map<std::int64_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[dataset.labels[i]].push_back(i);
  if (members.size() < 2) {
    throw DataError("create_pairs: need at least two classes to form negative pairs, got " +
                    std::to_string(members.size()));
  }

  std::vector<PairIndex> pairs;
  pairs.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t y = dataset.labels[i];
    const auto& same = members.at(y);
    std::size_t partner = i;
    if (same.size() > 1) {
      // Uniform over the class minus the anchor itself.
      std::uniform_int_distribution<std::size_t> pick(0, same.size() - 2);
      const std::size_t k = pick(rng);
      const auto self = static_cast<std::size_t>(std::lower_bound(same.begin(), same.end(), i) - same.begin());
      partner = same[k < self ? k : k + 1];
    }
    pairs.push_back({i, partner, 1});

    std::uniform_int_distribution<std::size_t> pick_other(0, n - same.size() - 1);
    std::size_t k = pick_other(rng);
    for (const auto& [label, rows] : members) {
      if (label == y) continue;
      if (k < rows.size()) {
        pairs.push_back({i, rows[k], 0});
        break;
      }
      k -= rows.size();
    }
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  return pairs;
}

std::vector<PairIndex> create_pairs(const LabeledDataset& dataset, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return create_pairs(dataset, rng);
}

PairBatch next_batch(const LabeledDataset& dataset, const std::vector<PairIndex>& pairs,
                     std::size_t batch_size, std::size_t& cursor) {
  if (batch_size == 0) throw ContractError("next_batch: batch_size must be at least 1");
  const std::size_t begin = std::min(cursor, pairs.size());
  const std::size_t count = std::min(batch_size, pairs.size() - begin);
  const std::size_t d = dataset.dim();
  PairBatch batch{Tensor<float>({count, d}), Tensor<float>({count, d}), Tensor<float>({count})};
  const float* src = dataset.features.storage().data();
  for (std::size_t m = 0; m < count; ++m) {
    const PairIndex& p = pairs[begin + m];
    std::copy_n(src + p.anchor * d, d, batch.anchors.storage().data() + m * d);
    std::copy_n(src + p.partner * d, d, batch.partners.storage().data() + m * d);
    batch.labels[m] = static_cast<float>(p.label);
  }
  cursor = begin + count;
  return batch;
}

PairStream::PairStream(const LabeledDataset& dataset, std::uint64_t seed)
    : dataset_(dataset), rng_(seed), pairs_(create_pairs(dataset_, rng_)) {}

PairBatch PairStream::next(std::size_t batch_size) {
  if (cursor_ >= pairs_.size()) {
    pairs_ = create_pairs(dataset_, rng_);
    cursor_ = 0;
    ++epoch_;
  }
  return next_batch(dataset_, pairs_, batch_size, cursor_);
}

}  // namespace relnov
