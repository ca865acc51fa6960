#include "relnov/model/config.hpp"

#include <cmath>

#include "relnov/errors.hpp"

namespace relnov {

void ModelConfig::validate() const {
  if (input_dim == 0 || feature_dim == 0 || model_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (num_blocks < 1) throw ConfigError("num_blocks must be at least 1");
  if (num_heads < 1 || model_dim % num_heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be at least 1");
  if (static_cast<std::uint8_t>(head_mode) > 1) throw ConfigError("unknown head mode");
  if (static_cast<std::uint8_t>(aggregation) > 3) throw ConfigError("unknown aggregation");
}

std::string_view to_string(HeadMode mode) {
  switch (mode) {
    case HeadMode::regression_sigmoid: return "regression";
    case HeadMode::classification_2way: return "classification";
  }
  return "unknown";
}

std::string_view to_string(Aggregation mode) {
  switch (mode) {
    case Aggregation::transformer: return "transformer";
    case Aggregation::max: return "max";
    case Aggregation::sum: return "sum";
    case Aggregation::concat: return "concat";
  }
  return "unknown";
}

HeadMode parse_head_mode(std::string_view text) {
  if (text == "regression" || text == "regression-sigmoid") return HeadMode::regression_sigmoid;
  if (text == "classification" || text == "classification-2way") return HeadMode::classification_2way;
  throw ConfigError("unknown head mode '" + std::string(text) + "'");
}

Aggregation parse_aggregation(std::string_view text) {
  if (text == "transformer") return Aggregation::transformer;
  if (text == "max") return Aggregation::max;
  if (text == "sum") return Aggregation::sum;
  if (text == "concat") return Aggregation::concat;
  throw ConfigError("unknown aggregation '" + std::string(text) + "'");
}

std::size_t transformer_relational_params(const ModelConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t hidden = cfg.mlp_ratio * d;
  const std::size_t per_block = 2 * d            // ln1
                                + 3 * d * d + 3 * d  // qkv
                                + d * d + d      // attention output
                                + 2 * d          // ln2
                                + d * hidden + hidden + hidden * d + d;
  return cfg.num_blocks * per_block + d;
}

std::size_t fixed_aggregation_hidden(const ModelConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t in = cfg.aggregation == Aggregation::concat ? 2 * d : d;
  const double target = static_cast<double>(transformer_relational_params(cfg) - d);
  const auto hidden = static_cast<std::size_t>(std::llround(target / static_cast<double>(in + 1 + d)));
  return hidden == 0 ? 1 : hidden;
}

std::size_t fixed_relational_params(const ModelConfig& cfg) {
  const std::size_t d = cfg.model_dim;
  const std::size_t in = cfg.aggregation == Aggregation::concat ? 2 * d : d;
  const std::size_t h = fixed_aggregation_hidden(cfg);
  return in * h + h + h * d + d;
}

}  // namespace relnov
