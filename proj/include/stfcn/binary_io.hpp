#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "stfcn/tensor.hpp"

namespace stfcn {

/// Little-endian byte sink used by the checkpoint formats.
class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i64(std::int64_t v) { le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void shape(const Shape& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    for (Index e : s) i64(e);
  }
  void doubles(const Tensord& t) {
    u64(static_cast<std::uint64_t>(t.size()));
    for (Index k = 0; k < t.size(); ++k) f64(t[k]);
  }
  std::string take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int b = 0; b < n; ++b) buf_.push_back(static_cast<char>((v >> (8 * b)) & 0xffU));
  }
  std::string buf_;
};

/// Bounds-checked reader; every short read is a FormatError.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(le(8)); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  /// A positive extent with a sanity ceiling, so corrupt input cannot
  /// trigger huge allocations.
  Index dim() {
    const std::int64_t v = i64();
    if (v < 1 || v > (std::int64_t{1} << 32)) throw FormatError("corrupt extent " + std::to_string(v));
    return static_cast<Index>(v);
  }
  Shape shape() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) throw FormatError("corrupt rank " + std::to_string(rank));
    Shape s(rank);
    for (auto& e : s) e = dim();
    return s;
  }
  void doubles(Tensord& t) {
    const std::uint64_t n = u64();
    if (n != static_cast<std::uint64_t>(t.size()))
      throw FormatError("parameter block has " + std::to_string(n) + " values, expected " + std::to_string(t.size()));
    need(8 * n);
    for (Index k = 0; k < t.size(); ++k) t[k] = f64();
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("truncated input");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int b = 0; b < n; ++b)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace stfcn
