#include "relnov/model/checkpoint.hpp"

#include <fstream>
#include <string>

#include "relnov/binary_io.hpp"

namespace relnov {

void save_checkpoint(const RelationalModel<float>& model, std::ostream& out) {
  ByteWriter w(out);
  const ModelConfig& cfg = model.config();
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(cfg.input_dim);
  w.put<std::uint64_t>(cfg.feature_dim);
  w.put<std::uint64_t>(cfg.model_dim);
  w.put<std::uint64_t>(cfg.num_blocks);
  w.put<std::uint64_t>(cfg.num_heads);
  w.put<std::uint64_t>(cfg.mlp_ratio);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.head_mode));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(cfg.aggregation));
  w.put<std::uint64_t>(cfg.seed);
  for (const auto& p : model.parameters()) {
    for (float v : p.tensor->data()) w.put<float>(v);
  }
  if (!w.ok()) throw Error("checkpoint: write failed");
}

void save_checkpoint(const RelationalModel<float>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint: cannot open " + path.string() + " for writing");
  save_checkpoint(model, out);
}

RelationalModel<float> load_checkpoint(std::istream& in) {
  ByteReader r(in);
  if (r.bytes(4, "magic") != std::string_view(kCheckpointMagic, 4)) {
    throw FormatError("checkpoint: bad magic", 0);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version), 4);
  }
  ModelConfig cfg;
  cfg.input_dim = r.get<std::uint64_t>("input_dim");
  cfg.feature_dim = r.get<std::uint64_t>("feature_dim");
  cfg.model_dim = r.get<std::uint64_t>("model_dim");
  cfg.num_blocks = r.get<std::uint64_t>("num_blocks");
  cfg.num_heads = r.get<std::uint64_t>("num_heads");
  cfg.mlp_ratio = r.get<std::uint64_t>("mlp_ratio");
  const std::uint64_t config_offset = r.offset();
  const auto head = r.get<std::uint8_t>("head_mode");
  const auto aggregation = r.get<std::uint8_t>("aggregation");
  cfg.head_mode = static_cast<HeadMode>(head);
  cfg.aggregation = static_cast<Aggregation>(aggregation);
  cfg.seed = r.get<std::uint64_t>("seed");
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid model config: ") + e.what(), config_offset);
  }
  RelationalModel<float> model(cfg);
  for (auto& p : model.parameters()) {
    for (float& v : p.tensor->data()) v = r.get<float>(p.name.c_str());
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes", r.offset());
  return model;
}

RelationalModel<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  return load_checkpoint(in);
}

}  // namespace relnov
