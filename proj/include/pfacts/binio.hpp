#pragma once

// Little-endian byte encoding shared by the .emb and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

#include "pfacts/errors.hpp"

namespace pfacts {

namespace detail {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  } else {
    return v;
  }
}

}  // namespace detail

class ByteWriter {
 public:
  void u32(std::uint32_t v) { put(detail::to_little(v)); }
  void f32(float v) { put(detail::to_little(std::bit_cast<std::uint32_t>(v))); }
  void f64(double v) { put(detail::to_little(std::bit_cast<std::uint64_t>(v))); }
  void bytes(std::string_view s) { buf_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  const std::string& buffer() const { return buf_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()))) {
      throw Error(ErrorCategory::kIo, "FileWriteError", "cannot write " + path.string());
    }
  }

 private:
  template <typename U>
  void put(U v) {
    char raw[sizeof(U)];
    std::memcpy(raw, &v, sizeof(U));
    buf_.append(raw, sizeof(U));
  }

  std::string buf_;
};

// Callers check `remaining()` before reads; reading past the end throws.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint32_t peek_u32() const {
    std::uint32_t v;
    need(4);
    std::memcpy(&v, data_.data() + pos_, 4);
    return detail::to_little(v);
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  float f32() { return std::bit_cast<float>(get<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(u32()); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw Error(ErrorCategory::kParse, "TruncatedFile", "unexpected end of data");
    }
  }

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return detail::to_little(v);
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace pfacts
