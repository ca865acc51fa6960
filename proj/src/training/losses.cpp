#include "relnov/training/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relnov {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* name) {
  if (a != b) {
    throw DimensionError(std::string(name) + ": " + std::to_string(a) + " predictions vs " +
                         std::to_string(b) + " labels");
  }
  if (a == 0) throw DimensionError(std::string(name) + ": empty batch");
}

}  // namespace

double mse_pair_loss(std::span<const double> sigma, std::span<const double> labels) {
  check_lengths(sigma.size(), labels.size(), "mse_pair_loss");
  double total = 0;
  for (std::size_t i = 0; i < sigma.size(); ++i) total += (sigma[i] - labels[i]) * (sigma[i] - labels[i]);
  return total / static_cast<double>(sigma.size());
}

double binary_ce_pair_loss(std::span<const double> sigma, std::span<const double> labels) {
  check_lengths(sigma.size(), labels.size(), "binary_ce_pair_loss");
  double total = 0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double p = sigma[i];
    // log1p keeps precision for p near 0 or 1.
    const double log_p = p > 0.5 ? std::log1p(-(1.0 - p)) : std::log(p);
    const double log_q = p < 0.5 ? std::log1p(-p) : std::log(1.0 - p);
    total -= labels[i] * log_p + (1.0 - labels[i]) * log_q;
  }
  return total / static_cast<double>(sigma.size());
}

}  // namespace relnov
