#include "relnov/training/train_config.hpp"

#include <string>

#include "relnov/errors.hpp"

namespace relnov {

void TrainConfig::validate() const {
  if (iterations < 1 || batch_size < 1 || warmup_iters < 1 || log_every < 1) {
    throw ConfigError("train: iterations, batch_size, warmup_iters and log_every must be >= 1");
  }
  if (!(base_lr >= 0.0)) throw ConfigError("train: base_lr must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
  if (!(trust_coefficient > 0.0)) throw ConfigError("train: trust_coefficient must be positive");
}

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::lars ? "lars" : "sgd"; }

std::string_view to_string(LossKind kind) { return kind == LossKind::mse ? "mse" : "binary_ce"; }

OptimizerKind parse_optimizer(std::string_view text) {
  if (text == "lars") return OptimizerKind::lars;
  if (text == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + std::string(text) + "'");
}

LossKind parse_loss(std::string_view text) {
  if (text == "mse") return LossKind::mse;
  if (text == "binary_ce" || text == "bce") return LossKind::binary_ce;
  throw ConfigError("unknown loss '" + std::string(text) + "'");
}

double lr_at(std::size_t iter, const TrainConfig& cfg) {
  if (iter < cfg.warmup_iters) {
    return cfg.base_lr * static_cast<double>(iter + 1) / static_cast<double>(cfg.warmup_iters);
  }
  return cfg.base_lr;
}

}  // namespace relnov
