#pragma once

// Byte-level helpers shared by the file formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace maskenc::binio {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

std::uint32_t load_be32(const std::uint8_t* p);
std::uint16_t load_le16(const std::uint8_t* p);
std::uint32_t load_le32(const std::uint8_t* p);
std::uint64_t load_le64(const std::uint8_t* p);

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v);
void append_le16(std::vector<std::uint8_t>& out, std::uint16_t v);
void append_le32(std::vector<std::uint8_t>& out, std::uint32_t v);
void append_le64(std::vector<std::uint8_t>& out, std::uint64_t v);

/// Bounds-checked little-endian reader; throws FormatError on overrun.
class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::span<const std::uint8_t> take(std::size_t n);
  std::uint8_t u8();
  std::uint16_t le16();
  std::uint32_t le32();
  std::uint64_t le64();
  float f32();

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

}  // namespace maskenc::binio
