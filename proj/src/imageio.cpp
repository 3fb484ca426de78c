#include "maskenc/imageio.hpp"

#include <algorithm>
#include <cctype>

#include "maskenc/binio.hpp"
#include "maskenc/errors.hpp"

namespace maskenc {

namespace {

constexpr std::uint8_t kImageMagic[4] = {'X', 'I', 'M', 'G'};
constexpr std::uint16_t kImageVersion = 1;

void check_payload(const RawImage& image) {
  if (image.pixels.size() != image.geometry.numel() || image.geometry.numel() == 0) {
    throw GeometryError("image payload of " + std::to_string(image.pixels.size()) + " bytes does not match " +
                        image.geometry.str());
  }
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::span<const std::uint8_t> bytes, std::size_t& pos, const std::string& what) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') tok.push_back(static_cast<char>(bytes[pos++]));
  if (tok.empty()) throw FormatError(what + ": truncated PNM header");
  return tok;
}

int pnm_int(std::span<const std::uint8_t> bytes, std::size_t& pos, const std::string& what) {
  const std::string tok = pnm_token(bytes, pos, what);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
      tok.size() > 6) {
    throw FormatError(what + ": bad PNM header field '" + tok + "'");
  }
  return std::stoi(tok);
}

}  // namespace

std::vector<std::uint8_t> encode_image(const RawImage& image) {
  check_payload(image);
  std::vector<std::uint8_t> out(std::begin(kImageMagic), std::end(kImageMagic));
  binio::append_le16(out, kImageVersion);
  binio::append_le16(out, static_cast<std::uint16_t>(image.geometry.height));
  binio::append_le16(out, static_cast<std::uint16_t>(image.geometry.width));
  binio::append_le16(out, static_cast<std::uint16_t>(image.geometry.channels));
  out.push_back(image.label);
  out.resize(16, 0);
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

RawImage decode_image(std::span<const std::uint8_t> bytes, const std::string& what) {
  binio::Reader r(bytes, what);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kImageMagic))) throw FormatError(what + ": not an image file");
  if (const auto v = r.le16(); v != kImageVersion) throw FormatError(what + ": unsupported version " + std::to_string(v));
  RawImage im;
  im.geometry.height = r.le16();
  im.geometry.width = r.le16();
  im.geometry.channels = r.le16();
  im.label = r.u8();
  r.take(3);
  if (im.geometry.numel() == 0) throw FormatError(what + ": empty geometry");
  if (r.remaining() != im.geometry.numel()) {
    throw FormatError(what + ": header geometry " + im.geometry.str() + " needs " +
                      std::to_string(im.geometry.numel()) + " payload bytes, file has " +
                      std::to_string(r.remaining()));
  }
  const auto payload = r.take(im.geometry.numel());
  im.pixels.assign(payload.begin(), payload.end());
  return im;
}

std::vector<std::uint8_t> encode_pnm(const RawImage& image) {
  check_payload(image);
  const Geometry& g = image.geometry;
  if (g.channels != 1 && g.channels != 3) {
    throw GeometryError("PNM export needs 1 or 3 channels, image is " + g.str());
  }
  const std::string header = std::string(g.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(g.width) + " " +
                             std::to_string(g.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t plane = static_cast<std::size_t>(g.height) * g.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < g.channels; ++c) out.push_back(image.pixels[c * plane + i]);
  }
  return out;
}

RawImage decode_pnm(std::span<const std::uint8_t> bytes, const std::string& what) {
  std::size_t pos = 0;
  const std::string magic = pnm_token(bytes, pos, what);
  if (magic != "P5" && magic != "P6") throw FormatError(what + ": only binary P5/P6 rasters are supported");
  RawImage im;
  im.geometry.channels = magic == "P5" ? 1 : 3;
  im.geometry.width = pnm_int(bytes, pos, what);
  im.geometry.height = pnm_int(bytes, pos, what);
  if (pnm_int(bytes, pos, what) != 255) throw FormatError(what + ": only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(what + ": truncated PNM header");
  ++pos;
  const std::size_t plane = static_cast<std::size_t>(im.geometry.height) * im.geometry.width;
  if (plane == 0) throw FormatError(what + ": empty geometry");
  if (bytes.size() - pos != im.geometry.numel()) {
    throw FormatError(what + ": expected " + std::to_string(im.geometry.numel()) + " raster bytes, found " +
                      std::to_string(bytes.size() - pos));
  }
  im.pixels.resize(im.geometry.numel());
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < im.geometry.channels; ++c) im.pixels[c * plane + i] = bytes[pos++];
  }
  return im;
}

void image_save(const RawImage& image, const std::filesystem::path& path) {
  binio::write_file(path, encode_image(image));
}

RawImage image_load(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes, path.string());
  return decode_image(bytes, path.string());
}

void pnm_save(const RawImage& image, const std::filesystem::path& path) { binio::write_file(path, encode_pnm(image)); }

}  // namespace maskenc
