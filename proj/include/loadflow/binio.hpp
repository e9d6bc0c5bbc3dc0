// Little-endian binary packing and checksum helpers for file formats.
#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace loadflow {

// CRC-32 (IEEE, as used by zlib) over a byte buffer.
std::uint32_t crc32_bytes(const void* data, std::size_t size);

// Reads a whole file; throws IoError on failure.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Writes a buffer via a temporary file + rename so readers never observe a
// partially written file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);

// Append-style little-endian packing into a byte vector.
class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void bytes(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + size);
  }
  void u32(std::uint32_t v) { PackInt(v); }
  void u64(std::uint64_t v) { PackInt(v); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void str(const std::string& s) { bytes(s.data(), s.size()); }

 private:
  template <typename T>
  void PackInt(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t>& out_;
};

// Cursor-based little-endian unpacking; throws IoError past the end.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}

  const std::uint8_t* bytes(std::size_t size);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str(std::size_t size);
  std::size_t remaining() const { return size_ - pos_; }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace loadflow
