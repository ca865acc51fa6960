#include "relnov/data/embedding_io.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "relnov/binary_io.hpp"

namespace relnov {
namespace {

constexpr std::uint8_t kHasLabels = 1u << 0;
constexpr std::uint8_t kHasDomains = 1u << 1;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no) {
  T value{};
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("embeddings csv line " + std::to_string(line_no) + ": cannot parse '" + text + "'");
  }
  return value;
}

}  // namespace

void write_embeddings(const LabeledDataset& dataset, std::ostream& out) {
  dataset.validate();
  ByteWriter w(out);
  w.bytes(std::string_view(kEmbeddingMagic, 4));
  w.put<std::uint32_t>(kEmbeddingVersion);
  w.put<std::uint64_t>(dataset.size());
  w.put<std::uint64_t>(dataset.dim());
  std::uint8_t flags = 0;
  if (dataset.has_labels()) flags |= kHasLabels;
  if (dataset.has_domains()) flags |= kHasDomains;
  w.put<std::uint8_t>(flags);
  for (float v : dataset.features.data()) w.put<float>(v);
  for (std::int64_t y : dataset.labels) w.put<std::int64_t>(y);
  for (std::int64_t dom : dataset.domain_ids) w.put<std::int64_t>(dom);
  if (!w.ok()) throw Error("embeddings: write failed");
}

LabeledDataset read_embeddings(std::istream& in) {
  ByteReader r(in);
  if (r.bytes(4, "magic") != std::string_view(kEmbeddingMagic, 4)) {
    throw FormatError("embeddings: bad magic", 0);
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kEmbeddingVersion) {
    throw FormatError("embeddings: unsupported version " + std::to_string(version), 4);
  }
  const auto n = r.get<std::uint64_t>("row count");
  const auto d = r.get<std::uint64_t>("dimension");
  const std::uint64_t flags_offset = r.offset();
  const auto flags = r.get<std::uint8_t>("flags");
  if (flags & ~(kHasLabels | kHasDomains)) {
    throw FormatError("embeddings: unknown flag bits", flags_offset);
  }
  if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d / sizeof(float)) {
    throw FormatError("embeddings: header sizes overflow", 8);
  }

  LabeledDataset ds;
  std::vector<float> data;
  for (std::uint64_t i = 0; i < n * d; ++i) data.push_back(r.get<float>("features"));
  ds.features = Tensor<float>({static_cast<std::size_t>(n), static_cast<std::size_t>(d)}, std::move(data));
  if (flags & kHasLabels) {
    for (std::uint64_t i = 0; i < n; ++i) ds.labels.push_back(r.get<std::int64_t>("labels"));
  }
  if (flags & kHasDomains) {
    for (std::uint64_t i = 0; i < n; ++i) ds.domain_ids.push_back(r.get<std::int64_t>("domain ids"));
  }
  if (!r.at_end()) throw FormatError("embeddings: trailing bytes", r.offset());
  return ds;
}

void write_embeddings_csv(const LabeledDataset& dataset, std::ostream& out) {
  dataset.validate();
  const std::size_t d = dataset.dim();
  for (std::size_t c = 0; c < d; ++c) out << 'f' << c << ',';
  out << "label,domain\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) out << fmt::format("{}", dataset.features.at(i, c)) << ',';
    if (dataset.has_labels()) out << dataset.labels[i];
    out << ',';
    if (dataset.has_domains()) out << dataset.domain_ids[i];
    out << '\n';
  }
}

LabeledDataset read_embeddings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("embeddings csv: missing header");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[header.size() - 2] != "label" || header.back() != "domain") {
    throw DataError("embeddings csv: header must end with label,domain");
  }
  const std::size_t d = header.size() - 2;
  for (std::size_t c = 0; c < d; ++c) {
    if (header[c] != "f" + std::to_string(c)) throw DataError("embeddings csv: bad header column " + header[c]);
  }
  LabeledDataset ds;
  std::vector<float> data;
  std::size_t rows = 0, labeled = 0, with_domain = 0;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != d + 2) {
      throw DataError("embeddings csv line " + std::to_string(line_no) + ": expected " +
                      std::to_string(d + 2) + " cells");
    }
    for (std::size_t c = 0; c < d; ++c) data.push_back(parse_number<float>(cells[c], line_no));
    if (!cells[d].empty()) {
      ds.labels.push_back(parse_number<std::int64_t>(cells[d], line_no));
      ++labeled;
    }
    if (!cells[d + 1].empty()) {
      ds.domain_ids.push_back(parse_number<std::int64_t>(cells[d + 1], line_no));
      ++with_domain;
    }
    ++rows;
  }
  if ((labeled != 0 && labeled != rows) || (with_domain != 0 && with_domain != rows)) {
    throw DataError("embeddings csv: label/domain columns must be filled for all rows or none");
  }
  ds.features = Tensor<float>({rows, d}, std::move(data));
  ds.validate();
  return ds;
}

void write_embeddings(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("embeddings: cannot open " + path.string() + " for writing");
  if (path.extension() == ".csv") {
    write_embeddings_csv(dataset, out);
  } else {
    write_embeddings(dataset, out);
  }
}

LabeledDataset read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("embeddings: cannot open " + path.string());
  LabeledDataset ds = path.extension() == ".csv" ? read_embeddings_csv(in) : read_embeddings(in);
  ds.name = path.stem().string();
  return ds;
}

}  // namespace relnov
