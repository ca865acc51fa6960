#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace relnov {

enum class OptimizerKind : std::uint8_t { lars, sgd };
enum class LossKind : std::uint8_t { mse, binary_ce };

struct TrainConfig {
  std::size_t iterations = 2000;
  std::size_t batch_size = 128;
  double base_lr = 0.02;
  std::size_t warmup_iters = 100;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  double trust_coefficient = 0.001;
  LossKind loss = LossKind::mse;
  std::uint64_t seed = 0;
  std::size_t log_every = 50;

  void validate() const;
};

std::string_view to_string(OptimizerKind kind);
std::string_view to_string(LossKind kind);
OptimizerKind parse_optimizer(std::string_view text);
LossKind parse_loss(std::string_view text);

// Linear warmup over warmup_iters steps, then constant base_lr.
double lr_at(std::size_t iter, const TrainConfig& cfg);

}  // namespace relnov
