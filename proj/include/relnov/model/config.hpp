#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace relnov {

enum class HeadMode : std::uint8_t { regression_sigmoid = 0, classification_2way = 1 };

// How a feature pair is combined before the similarity head.
enum class Aggregation : std::uint8_t { transformer = 0, max = 1, sum = 2, concat = 3 };

struct ModelConfig {
  std::size_t input_dim = 16;
  std::size_t feature_dim = 64;
  std::size_t model_dim = 64;
  std::size_t num_blocks = 4;
  std::size_t num_heads = 4;
  std::size_t mlp_ratio = 4;
  HeadMode head_mode = HeadMode::regression_sigmoid;
  Aggregation aggregation = Aggregation::transformer;
  std::uint64_t seed = 0;

  // Throws ConfigError on any violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

std::string_view to_string(HeadMode mode);
std::string_view to_string(Aggregation mode);
HeadMode parse_head_mode(std::string_view text);
Aggregation parse_aggregation(std::string_view text);

// Parameters in the transformer relational module: blocks plus label token.
std::size_t transformer_relational_params(const ModelConfig& cfg);

// Hidden width of the fixed-aggregation MLP, chosen so its parameter count
// tracks transformer_relational_params for the same model width.
std::size_t fixed_aggregation_hidden(const ModelConfig& cfg);

// Parameters in the fixed-aggregation MLP (both affine layers).
std::size_t fixed_relational_params(const ModelConfig& cfg);

}  // namespace relnov
