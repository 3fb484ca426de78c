#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "maskenc/dataio.hpp"

namespace maskenc {

/// Lossless image container with the mask file layout: "XIMG", u16 version,
/// u16 H, W, C, u8 label, 3 reserved bytes, channel-planar payload.
std::vector<std::uint8_t> encode_image(const RawImage& image);
RawImage decode_image(std::span<const std::uint8_t> bytes, const std::string& what = "image");

/// Binary PGM (1 channel) or PPM (3 channels) raster.
std::vector<std::uint8_t> encode_pnm(const RawImage& image);
RawImage decode_pnm(std::span<const std::uint8_t> bytes, const std::string& what = "image");

void image_save(const RawImage& image, const std::filesystem::path& path);
/// Reads either format, chosen by the leading magic bytes.
RawImage image_load(const std::filesystem::path& path);
void pnm_save(const RawImage& image, const std::filesystem::path& path);

}  // namespace maskenc
