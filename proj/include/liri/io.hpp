#pragma once

/** \file io.hpp
 *  \brief Little-endian binary encoding and atomic file replacement.
 *
 * All persisted liri files (checkpoints, BM25 and token indexes) are built
 * with BinaryWriter and parsed with BinaryReader. Multi-byte values are
 * little-endian regardless of host order; strings are u32 length + bytes.
 */

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace liri::io {

class BinaryWriter {
 public:
  void magic(std::string_view m) { buf_.append(m); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);
  void f32s(std::span<const float> values);
  void u32s(std::span<const std::uint32_t> values);

  [[nodiscard]] const std::string& bytes() const noexcept { return buf_; }
  [[nodiscard]] std::string take() noexcept { return std::move(buf_); }

 private:
  std::string buf_;
};

/// Reads from a byte buffer; any read past the end throws Errc::truncated.
class BinaryReader {
 public:
  BinaryReader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}

  /// Throws Errc::bad_magic when the next bytes differ from `m`.
  void expect_magic(std::string_view m);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  void f32s(std::span<float> out);
  void u32s(std::span<std::uint32_t> out);

  [[nodiscard]] std::size_t remaining() const noexcept { return data_.size() - pos_; }
  /// Throws Errc::malformed if unread bytes remain.
  void expect_end() const;

 private:
  std::string_view take(std::size_t n);

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, flushes, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace liri::io
