#include "relnov/training/trainer.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "relnov/data/pairs.hpp"
#include "relnov/training/losses.hpp"
#include "relnov/training/optimizer.hpp"

namespace relnov {

Var<float> pair_batch_loss(const BoundModel<float>& model, Var<float> anchors, Var<float> partners,
                           const Tensor<float>& labels, LossKind loss) {
  const std::size_t pairs = anchors.rows();
  // One feature-extractor pass over anchors and partners together.
  Var<float> features = extract_features(model, concat_rows(anchors, partners));
  Var<float> z_a = slice_rows(features, 0, pairs);
  Var<float> z_b = slice_rows(features, pairs, pairs);
  Var<float> logits = similarity_logit(model, relate(model, z_a, z_b));
  if (loss == LossKind::binary_ce) return binary_ce_pair_loss(logits, labels);
  return mse_pair_loss(sigmoid(logits), labels);
}

TrainResult train(RelationalModel<float>& model, const LabeledDataset& support,
                  const TrainConfig& cfg, const TrainLogger& logger) {
  cfg.validate();
  support.validate();
  if (support.dim() != model.config().input_dim) {
    throw DimensionError("train: support has " + std::to_string(support.dim()) +
                         " features, model expects " + std::to_string(model.config().input_dim));
  }
  if (support.class_ids().size() < 2) {
    throw DataError("train: support set needs at least two classes");
  }

  PairStream stream(support, cfg.seed);
  OptimizerState<float> state;
  model.set_requires_grad(true);
  const auto params = model.parameters();

  TrainResult result;
  result.losses.reserve(cfg.iterations);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    const PairBatch batch = stream.next(cfg.batch_size);
    model.zero_grad();
    double loss_value = 0;
    {
      Tape<float> tape;
      BoundModel<float> bound(model, tape);
      Var<float> loss = pair_batch_loss(bound, tape.leaf(batch.anchors), tape.leaf(batch.partners),
                                        batch.labels, cfg.loss);
      loss_value = loss.value()[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError("train: non-finite loss at iteration " + std::to_string(iter));
      }
      tape.backward(loss);
    }
    const double lr = lr_at(iter, cfg);
    optimizer_step(params, state, cfg, lr);
    result.losses.push_back(loss_value);
    if (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations) {
      LossRecord record{iter, loss_value, lr};
      result.log.push_back(record);
      if (logger) logger(record);
    }
  }
  result.epochs = stream.epoch() + 1;
  model.set_requires_grad(false);
  return result;
}

void write_loss_csv(const TrainResult& result, std::ostream& out) {
  out << "iter,loss,lr\n";
  for (const auto& r : result.log) out << fmt::format("{},{},{}\n", r.iter, r.loss, r.lr);
}

}  // namespace relnov
