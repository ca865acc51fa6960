#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <type_traits>

#include "relnov/errors.hpp"

namespace relnov {

// Little-endian primitive writer.
class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void bytes(std::string_view raw) { out_.write(raw.data(), static_cast<std::streamsize>(raw.size())); }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    out_.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }

  bool ok() const { return static_cast<bool>(out_); }

 private:
  std::ostream& out_;
};

// Little-endian primitive reader that reports the byte offset of every failure.
class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const noexcept { return offset_; }

  std::string bytes(std::size_t n, const char* what) {
    std::string raw(n, '\0');
    in_.read(raw.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("truncated input while reading ") + what, offset_);
    }
    offset_ += n;
    return raw;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get(const char* what) {
    unsigned char buf[sizeof(T)];
    in_.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (static_cast<std::size_t>(in_.gcount()) != sizeof(T)) {
      throw FormatError(std::string("truncated input while reading ") + what, offset_);
    }
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    offset_ += sizeof(T);
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace relnov
