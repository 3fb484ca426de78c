#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "maskenc/dataio.hpp"

namespace maskenc {

/// 256-bit key material plus a domain-separation label.
struct MaskSeed {
  std::array<std::uint8_t, 32> key{};
  std::string label = "maskenc/mask";

  /// 64 hex digits taken verbatim, or a decimal integer stored little-endian
  /// in the low 8 key bytes. Throws std::invalid_argument otherwise.
  static MaskSeed parse(const std::string& text);
  static MaskSeed from_u64(std::uint64_t value);

  bool operator==(const MaskSeed&) const = default;
};

/// The XOR key: one byte per pixel slot, channel-planar like RawImage.
struct Mask {
  std::vector<std::uint8_t> bytes;
  Geometry geometry;

  bool operator==(const Mask&) const = default;
};

/// ChaCha20 (RFC 8439) keystream keyed by the seed. The 96-bit nonce is the
/// first 12 bytes of BLAKE2b-256("maskenc-mask-v1" | label | "HxWxC"), block
/// counter 0. Pure function of (seed, geometry).
Mask mask_from_seed(const MaskSeed& seed, Geometry geometry);

/// Elementwise XOR; applying the same mask twice restores the input.
std::vector<std::uint8_t> apply_mask(std::span<const std::uint8_t> image, const Mask& mask);
void apply_mask_inplace(std::span<std::uint8_t> image, const Mask& mask);

/// Mask file: "XMSK", u16 version, u16 H, W, C, 4 reserved bytes, payload.
void mask_save(const Mask& mask, const std::filesystem::path& path);
Mask mask_load(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask(const Mask& mask);
Mask decode_mask(std::span<const std::uint8_t> bytes, const std::string& what = "mask");

/// Number of key bits, H*W*C*8: the key space is 2^key_space_bits.
std::uint64_t key_space_bits(Geometry geometry);

/// Mask geometry used for a dataset's (replicated) input images.
Geometry mask_geometry(DatasetKind kind);

/// Raw keystream access, exposed for test vectors.
std::vector<std::uint8_t> chacha20_keystream(std::span<const std::uint8_t, 32> key,
                                             std::span<const std::uint8_t, 12> nonce, std::uint32_t counter,
                                             std::size_t length);

}  // namespace maskenc
