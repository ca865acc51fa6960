#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include "relnov/data/dataset.hpp"
#include "relnov/model/relational_model.hpp"
#include "relnov/training/train_config.hpp"

namespace relnov {

struct LossRecord {
  std::size_t iter;
  double loss;
  double lr;
};

struct TrainResult {
  std::vector<double> losses;  // every iteration
  std::vector<LossRecord> log;  // every log_every iterations, plus the last one
  std::size_t epochs = 0;
};

using TrainLogger = std::function<void(const LossRecord&)>;

// Batch loss for one set of pairs, recorded on `tape` for backpropagation.
Var<float> pair_batch_loss(const BoundModel<float>& model, Var<float> anchors, Var<float> partners,
                           const Tensor<float>& labels, LossKind loss);

// Pair-regression training: per epoch the pair list is rebuilt and shuffled,
// then consumed batch by batch until cfg.iterations updates have been made.
TrainResult train(RelationalModel<float>& model, const LabeledDataset& support,
                  const TrainConfig& cfg, const TrainLogger& logger = {});

// CSV with header iter,loss,lr.
void write_loss_csv(const TrainResult& result, std::ostream& out);

}  // namespace relnov
