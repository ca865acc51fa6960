#pragma once

#include <cstddef>
#include <vector>

#include "relnov/model/relational_model.hpp"
#include "relnov/training/train_config.hpp"

namespace relnov {

template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> momentum;  // one buffer per parameter tensor
  std::size_t step = 0;
};

// Per tensor w with gradient g:
//   g' = g + wd * w
//   local_lr = trust * ||w|| / (||g'|| + 1e-12) if ||w|| > 0, else 1
//   m = momentum * m + local_lr * lr * g'
//   w = w - m
template <typename T>
void lars_step(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
               const TrainConfig& cfg, double lr);

// Classic momentum SGD: g' = g + wd * w; m = momentum * m + g'; w = w - lr * m.
template <typename T>
void sgd_step(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
              const TrainConfig& cfg, double lr);

template <typename T>
void optimizer_step(const std::vector<ParamRef<T>>& params, OptimizerState<T>& state,
                    const TrainConfig& cfg, double lr);

}  // namespace relnov
