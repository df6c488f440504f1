#include "liri/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "liri/error.hpp"

namespace liri::io {

namespace {

template <typename T>
void put_le(std::string& buf, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
}

template <typename T>
T get_le(std::string_view bytes) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<std::uint8_t>(bytes[i])) << (8 * i);
  }
  return v;
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void BinaryWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void BinaryWriter::f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void BinaryWriter::f32s(std::span<const float> values) {
  buf_.reserve(buf_.size() + 4 * values.size());
  for (float v : values) f32(v);
}

void BinaryWriter::u32s(std::span<const std::uint32_t> values) {
  buf_.reserve(buf_.size() + 4 * values.size());
  for (auto v : values) u32(v);
}

std::string_view BinaryReader::take(std::size_t n) {
  if (n > remaining()) {
    throw Error(Errc::truncated, what_ + ": truncated file (needed " + std::to_string(n) +
                                     " bytes at offset " + std::to_string(pos_) + ")");
  }
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void BinaryReader::expect_magic(std::string_view m) {
  const auto avail = std::min(remaining(), m.size());
  if (data_.substr(pos_, avail) == m.substr(0, avail) && avail < m.size()) {
    throw Error(Errc::truncated, what_ + ": truncated inside the magic string");
  }
  if (avail < m.size() || data_.substr(pos_, m.size()) != m) {
    throw Error(Errc::bad_magic, what_ + ": bad magic (expected \"" + std::string(m) + "\")");
  }
  pos_ += m.size();
}

std::uint8_t BinaryReader::u8() { return static_cast<std::uint8_t>(take(1)[0]); }
std::uint32_t BinaryReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t BinaryReader::u64() { return get_le<std::uint64_t>(take(8)); }
float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  auto n = u32();
  return std::string(take(n));
}

void BinaryReader::f32s(std::span<float> out) {
  auto bytes = take(4 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes.substr(4 * i, 4)));
  }
}

void BinaryReader::u32s(std::span<std::uint32_t> out) {
  auto bytes = take(4 * out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = get_le<std::uint32_t>(bytes.substr(4 * i, 4));
  }
}

void BinaryReader::expect_end() const {
  if (remaining() != 0) {
    throw Error(Errc::malformed,
                what_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(Errc::io, "write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::io, "cannot rename into " + path.string());
  }
}

}  // namespace liri::io
