#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>

#include "relnov/data/synthetic.hpp"
#include "relnov/model/config.hpp"
#include "relnov/training/train_config.hpp"

namespace relnov {

// Every tunable of a run. Serialized as flat `key = value` text grouped into
// [model], [train], [data] and [run] sections.
struct RunConfig {
  ModelConfig model;
  std::optional<HeadMode> head_mode;  // unset: follows the training loss
  TrainConfig train;
  SyntheticSpec data;
  std::size_t threads = 1;
  std::size_t bench_seeds = 3;

  // Head mode actually used: explicit setting, else classification for
  // binary_ce and regression for mse.
  HeadMode resolved_head_mode() const;
  ModelConfig resolved_model(std::size_t input_dim) const;

  // Applies `section.key = value`; throws ConfigError for unknown keys or bad values.
  void set(const std::string& section, const std::string& key, const std::string& value);
  // "section.key=value"
  void apply_override(const std::string& assignment);
  // Sets the data, model and training seeds together.
  void set_seed(std::uint64_t seed);

  void validate() const;
};

RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);
std::string to_config_text(const RunConfig& cfg);

// Large-scale training values, kept for reference (LARS, lr 0.008 with 500
// warmup iterations, batch 4096, 13k iterations).
RunConfig paper_scale_config();

}  // namespace relnov
