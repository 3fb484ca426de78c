#include "maskenc/masking.hpp"

#include <algorithm>
#include <stdexcept>

#include <sodium.h>

#include "maskenc/binio.hpp"
#include "maskenc/errors.hpp"

namespace maskenc {

namespace {

constexpr std::uint8_t kMaskMagic[4] = {'X', 'M', 'S', 'K'};
constexpr std::uint16_t kMaskVersion = 1;

void ensure_sodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialisation failed");
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

MaskSeed MaskSeed::from_u64(std::uint64_t value) {
  MaskSeed seed;
  for (int i = 0; i < 8; ++i) seed.key[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(value >> (8 * i));
  return seed;
}

MaskSeed MaskSeed::parse(const std::string& text) {
  if (text.size() == 64 && std::all_of(text.begin(), text.end(), [](char c) { return hex_value(c) >= 0; })) {
    MaskSeed seed;
    for (std::size_t i = 0; i < 32; ++i) {
      seed.key[i] = static_cast<std::uint8_t>(hex_value(text[2 * i]) * 16 + hex_value(text[2 * i + 1]));
    }
    return seed;
  }
  if (!text.empty() && text.size() <= 20 && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    try {
      return from_u64(std::stoull(text));
    } catch (const std::out_of_range&) {
    }
  }
  throw std::invalid_argument("seed must be 64 hex digits or a decimal 64-bit integer, got '" + text + "'");
}

std::vector<std::uint8_t> chacha20_keystream(std::span<const std::uint8_t, 32> key,
                                             std::span<const std::uint8_t, 12> nonce, std::uint32_t counter,
                                             std::size_t length) {
  ensure_sodium();
  std::vector<std::uint8_t> out(length, 0);
  crypto_stream_chacha20_ietf_xor_ic(out.data(), out.data(), out.size(), nonce.data(), counter, key.data());
  return out;
}

Mask mask_from_seed(const MaskSeed& seed, Geometry geometry) {
  if (geometry.height <= 0 || geometry.width <= 0 || geometry.channels <= 0) {
    throw std::invalid_argument("mask geometry must be positive, got " + geometry.str());
  }
  ensure_sodium();
  const std::string context = "maskenc-mask-v1" + seed.label + geometry.str();
  std::array<std::uint8_t, crypto_generichash_BYTES> digest{};
  crypto_generichash(digest.data(), digest.size(), reinterpret_cast<const unsigned char*>(context.data()),
                     context.size(), nullptr, 0);
  std::array<std::uint8_t, 12> nonce{};
  std::copy_n(digest.begin(), nonce.size(), nonce.begin());
  return Mask{chacha20_keystream(seed.key, nonce, 0, geometry.numel()), geometry};
}

void apply_mask_inplace(std::span<std::uint8_t> image, const Mask& mask) {
  if (image.size() != mask.bytes.size()) {
    throw GeometryError("apply_mask: image has " + std::to_string(image.size()) + " bytes, mask " +
                        mask.geometry.str() + " has " + std::to_string(mask.bytes.size()));
  }
  for (std::size_t i = 0; i < image.size(); ++i) image[i] ^= mask.bytes[i];
}

std::vector<std::uint8_t> apply_mask(std::span<const std::uint8_t> image, const Mask& mask) {
  std::vector<std::uint8_t> out(image.begin(), image.end());
  apply_mask_inplace(out, mask);
  return out;
}

std::vector<std::uint8_t> encode_mask(const Mask& mask) {
  if (mask.bytes.size() != mask.geometry.numel()) throw GeometryError("mask payload does not match its geometry");
  std::vector<std::uint8_t> out(std::begin(kMaskMagic), std::end(kMaskMagic));
  binio::append_le16(out, kMaskVersion);
  binio::append_le16(out, static_cast<std::uint16_t>(mask.geometry.height));
  binio::append_le16(out, static_cast<std::uint16_t>(mask.geometry.width));
  binio::append_le16(out, static_cast<std::uint16_t>(mask.geometry.channels));
  out.resize(16, 0);
  out.insert(out.end(), mask.bytes.begin(), mask.bytes.end());
  return out;
}

Mask decode_mask(std::span<const std::uint8_t> bytes, const std::string& what) {
  binio::Reader r(bytes, what);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMaskMagic))) throw FormatError(what + ": not a mask file");
  if (const auto v = r.le16(); v != kMaskVersion) throw FormatError(what + ": unsupported version " + std::to_string(v));
  Mask m;
  m.geometry.height = r.le16();
  m.geometry.width = r.le16();
  m.geometry.channels = r.le16();
  r.take(4);
  if (m.geometry.numel() == 0) throw FormatError(what + ": empty geometry");
  if (r.remaining() != m.geometry.numel()) {
    throw FormatError(what + ": header geometry " + m.geometry.str() + " needs " + std::to_string(m.geometry.numel()) +
                      " payload bytes, file has " + std::to_string(r.remaining()));
  }
  const auto payload = r.take(m.geometry.numel());
  m.bytes.assign(payload.begin(), payload.end());
  return m;
}

void mask_save(const Mask& mask, const std::filesystem::path& path) { binio::write_file(path, encode_mask(mask)); }

Mask mask_load(const std::filesystem::path& path) { return decode_mask(binio::read_file(path), path.string()); }

std::uint64_t key_space_bits(Geometry geometry) { return static_cast<std::uint64_t>(geometry.numel()) * 8; }

Geometry mask_geometry(DatasetKind kind) {
  return kind == DatasetKind::mnist ? Geometry{28, 28, 3} : kCifarGeometry;
}

}  // namespace maskenc
