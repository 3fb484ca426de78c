#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "maskenc/binio.hpp"
#include "maskenc/errors.hpp"
#include "maskenc/imageio.hpp"

using namespace maskenc;
namespace fs = std::filesystem;

namespace {

RawImage random_image(Geometry g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RawImage im{std::vector<std::uint8_t>(g.numel()), g, static_cast<std::uint8_t>(seed % 10)};
  for (auto& p : im.pixels) p = static_cast<std::uint8_t>(rng());
  return im;
}

void expect_same(const RawImage& a, const RawImage& b) {
  EXPECT_EQ(a.geometry, b.geometry);
  EXPECT_EQ(a.pixels, b.pixels);
}

}  // namespace

TEST(ImageContainer, RoundTripAndLayout) {
  const RawImage im = random_image(Geometry{32, 32, 3}, 4);
  const auto bytes = encode_image(im);
  ASSERT_EQ(bytes.size(), 16u + 3072u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "XIMG");
  EXPECT_EQ(bytes[6], 32);  // little-endian H
  EXPECT_EQ(bytes[10], 3);  // C
  EXPECT_EQ(bytes[12], 4);  // label
  const RawImage back = decode_image(bytes);
  expect_same(back, im);
  EXPECT_EQ(back.label, im.label);
  EXPECT_TRUE(std::equal(im.pixels.begin(), im.pixels.end(), bytes.begin() + 16));
}

TEST(ImageContainer, RejectsDamage) {
  const auto bytes = encode_image(random_image(Geometry{28, 28, 1}, 1));
  auto short_payload = bytes;
  short_payload.pop_back();
  EXPECT_THROW(decode_image(short_payload), FormatError);
  auto magic = bytes;
  magic[0] = 'Y';
  EXPECT_THROW(decode_image(magic), FormatError);
  auto version = bytes;
  version[4] = 9;
  EXPECT_THROW(decode_image(version), FormatError);
  auto zero = bytes;
  zero[6] = zero[7] = 0;
  EXPECT_THROW(decode_image(zero), FormatError);
  EXPECT_THROW(decode_image(std::span(bytes).first(10)), FormatError);
}

TEST(Pnm, RoundTripsGrayAndColour) {
  for (Geometry g : {Geometry{28, 28, 1}, Geometry{32, 32, 3}, Geometry{5, 7, 3}}) {
    const RawImage im = random_image(g, 9);
    const auto bytes = encode_pnm(im);
    EXPECT_EQ(bytes[0], 'P');
    EXPECT_EQ(bytes[1], g.channels == 1 ? '5' : '6');
    expect_same(decode_pnm(bytes), im);
  }
}

TEST(Pnm, InterleavesChannels) {
  RawImage im{{10, 11, 20, 21, 30, 31}, Geometry{1, 2, 3}, 0};
  const auto bytes = encode_pnm(im);
  const std::vector<std::uint8_t> tail(bytes.end() - 6, bytes.end());
  EXPECT_EQ(tail, (std::vector<std::uint8_t>{10, 20, 30, 11, 21, 31}));
}

TEST(Pnm, ParsesCommentsAndRejectsUnsupported) {
  const std::string text = "P5\n# made by hand\n2 1\n# depth\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(7);
  bytes.push_back(200);
  const RawImage im = decode_pnm(bytes);
  EXPECT_EQ(im.geometry, (Geometry{1, 2, 1}));
  EXPECT_EQ(im.pixels, (std::vector<std::uint8_t>{7, 200}));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_pnm(truncated), FormatError);
  const std::string deep = "P5 2 1 65535\n";
  std::vector<std::uint8_t> d(deep.begin(), deep.end());
  d.resize(d.size() + 4, 0);
  EXPECT_THROW(decode_pnm(d), FormatError);
  const std::string ascii = "P2 1 1 255\n9\n";
  EXPECT_THROW(decode_pnm(std::vector<std::uint8_t>(ascii.begin(), ascii.end())), FormatError);
  EXPECT_THROW(encode_pnm(random_image(Geometry{2, 2, 2}, 1)), GeometryError);
}

TEST(ImageFiles, LoadDetectsFormat) {
  const fs::path dir = fs::temp_directory_path() / "maskenc_test_imageio";
  fs::create_directories(dir);
  const RawImage im = random_image(Geometry{32, 32, 3}, 2);
  image_save(im, dir / "a.ximg");
  pnm_save(im, dir / "a.ppm");
  expect_same(image_load(dir / "a.ximg"), im);
  expect_same(image_load(dir / "a.ppm"), im);
  EXPECT_THROW(image_load(dir / "missing.ximg"), IoError);
  fs::remove_all(dir);
}
