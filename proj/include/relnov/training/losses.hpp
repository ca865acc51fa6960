#pragma once

#include <span>

#include "relnov/numerics/ops.hpp"

namespace relnov {

// Batch mean of (sigma - l)^2.
template <typename T>
Var<T> mse_pair_loss(Var<T> sigma, const Tensor<T>& labels) {
  return mse_loss(sigma, labels);
}

// Batch-mean binary cross-entropy, taking the pre-sigmoid similarity logits.
template <typename T>
Var<T> binary_ce_pair_loss(Var<T> logits, const Tensor<T>& labels) {
  return bce_with_logits(logits, labels);
}

// Value-only forms over probabilities, used for reporting and loss-shape checks.
double mse_pair_loss(std::span<const double> sigma, std::span<const double> labels);
double binary_ce_pair_loss(std::span<const double> sigma, std::span<const double> labels);

}  // namespace relnov
