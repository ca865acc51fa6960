#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "relnov/model/relational_model.hpp"

namespace relnov {

inline constexpr char kCheckpointMagic[4] = {'R', 'S', 'N', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "RSNM", u32 version,
//   u64 input_dim, u64 feature_dim, u64 model_dim, u64 num_blocks, u64 num_heads,
//   u64 mlp_ratio, u8 head_mode, u8 aggregation, u64 seed,
//   then every parameter in RelationalModel order as raw f32 values.
void save_checkpoint(const RelationalModel<float>& model, std::ostream& out);
void save_checkpoint(const RelationalModel<float>& model, const std::filesystem::path& path);

RelationalModel<float> load_checkpoint(std::istream& in);
RelationalModel<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace relnov
