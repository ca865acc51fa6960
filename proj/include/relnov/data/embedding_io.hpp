#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "relnov/data/dataset.hpp"

namespace relnov {

inline constexpr char kEmbeddingMagic[4] = {'R', 'S', 'N', 'D'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;

// Binary layout, little-endian:
//   "RSND", u32 version = 1, u64 n, u64 d, u8 flags (bit0 labels, bit1 domains),
//   n*d f32 row-major features, [n i64 labels], [n i64 domain ids].
void write_embeddings(const LabeledDataset& dataset, std::ostream& out);
LabeledDataset read_embeddings(std::istream& in);

// CSV fallback with header f0,...,f{d-1},label,domain. Missing ids are written
// as empty cells.
void write_embeddings_csv(const LabeledDataset& dataset, std::ostream& out);
LabeledDataset read_embeddings_csv(std::istream& in);

// Dispatch on extension: ".csv" uses the CSV form, anything else the binary one.
void write_embeddings(const LabeledDataset& dataset, const std::filesystem::path& path);
LabeledDataset read_embeddings(const std::filesystem::path& path);

}  // namespace relnov
