#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "relnov/data/dataset.hpp"

namespace relnov {

struct PairIndex {
  std::size_t anchor;
  std::size_t partner;
  int label;  // 1 when anchor and partner share a class

  friend bool operator==(const PairIndex&, const PairIndex&) = default;
};

struct PairBatch {
  Tensor<float> anchors;   // b x d
  Tensor<float> partners;  // b x d
  Tensor<float> labels;    // b

  std::size_t size() const { return labels.size(); }
};

// Two pairs per anchor: one same-class partner (the anchor itself only for a
// singleton class) and one different-class partner, shuffled. Draws from `rng`.
std::vector<PairIndex> create_pairs(const LabeledDataset& dataset, std::mt19937_64& rng);
std::vector<PairIndex> create_pairs(const LabeledDataset& dataset, std::uint64_t seed);

// Gathers pairs [cursor, cursor + batch_size) and advances the cursor. The
// final batch may be short; an exhausted list yields an empty batch.
PairBatch next_batch(const LabeledDataset& dataset, const std::vector<PairIndex>& pairs,
                     std::size_t batch_size, std::size_t& cursor);

// Endless batch source that rebuilds the pair list at every epoch boundary.
class PairStream {
 public:
  PairStream(const LabeledDataset& dataset, std::uint64_t seed);

  PairBatch next(std::size_t batch_size);

  std::size_t epoch() const noexcept { return epoch_; }
  const std::vector<PairIndex>& pairs() const noexcept { return pairs_; }

 private:
  const LabeledDataset& dataset_;
  std::mt19937_64 rng_;
  std::vector<PairIndex> pairs_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

}  // namespace relnov
