#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "maskenc/binio.hpp"
#include "maskenc/errors.hpp"
#include "maskenc/dataio.hpp"
#include "maskenc/errors.hpp"
#include "maskenc/synthetic.hpp"

using namespace maskenc;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("maskenc_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<std::uint8_t> idx_images(std::uint32_t magic, std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
  std::vector<std::uint8_t> b;
  binio::append_be32(b, magic);
  binio::append_be32(b, count);
  binio::append_be32(b, rows);
  binio::append_be32(b, cols);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) b.push_back(static_cast<std::uint8_t>(i * 7 + 3));
  return b;
}

std::vector<std::uint8_t> idx_labels(std::uint32_t magic, std::vector<std::uint8_t> labels) {
  std::vector<std::uint8_t> b;
  binio::append_be32(b, magic);
  binio::append_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

}  // namespace

TEST(Mnist, HandBuiltFixtureRoundTrips) {
  TempDir dir("mnist_fixture");
  const auto images = idx_images(0x803, 2, 28, 28);
  binio::write_file(dir.path() / "img", images);
  binio::write_file(dir.path() / "lab", idx_labels(0x801, {3, 9}));
  const DatasetSplit s = load_mnist(dir.path() / "img", dir.path() / "lab", SplitRole::test);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.role, SplitRole::test);
  EXPECT_EQ(s.images[0].label, 3);
  EXPECT_EQ(s.images[1].label, 9);
  EXPECT_EQ(s.images[1].geometry, kMnistGeometry);
  for (std::size_t i = 0; i < 784; ++i) {
    EXPECT_EQ(s.images[0].pixels[i], images[16 + i]);
    EXPECT_EQ(s.images[1].pixels[i], images[16 + 784 + i]);
  }
  write_mnist(s, dir.path() / "img2", dir.path() / "lab2");
  EXPECT_EQ(binio::read_file(dir.path() / "img2"), images);
  EXPECT_EQ(binio::read_file(dir.path() / "lab2"), idx_labels(0x801, {3, 9}));
}

TEST(Mnist, HeaderValidation) {
  TempDir dir("mnist_bad");
  const auto p = dir.path();
  binio::write_file(p / "lab", idx_labels(0x801, {1, 2}));
  binio::write_file(p / "bad_magic", idx_images(0x801, 2, 28, 28));
  EXPECT_THROW(load_mnist(p / "bad_magic", p / "lab"), FormatError);
  binio::write_file(p / "bad_dims", idx_images(0x803, 2, 27, 28));
  EXPECT_THROW(load_mnist(p / "bad_dims", p / "lab"), FormatError);
  binio::write_file(p / "three", idx_images(0x803, 3, 28, 28));
  EXPECT_THROW(load_mnist(p / "three", p / "lab"), FormatError);
  auto truncated = idx_images(0x803, 2, 28, 28);
  truncated.pop_back();
  binio::write_file(p / "trunc", truncated);
  EXPECT_THROW(load_mnist(p / "trunc", p / "lab"), FormatError);
  binio::write_file(p / "ok", idx_images(0x803, 2, 28, 28));
  binio::write_file(p / "lab_magic", idx_labels(0x803, {1, 2}));
  EXPECT_THROW(load_mnist(p / "ok", p / "lab_magic"), FormatError);
  binio::write_file(p / "lab_range", idx_labels(0x801, {1, 10}));
  EXPECT_THROW(load_mnist(p / "ok", p / "lab_range"), FormatError);
  EXPECT_THROW(load_mnist(p / "missing", p / "lab"), IoError);
}

TEST(Cifar, TwoRecordFixtureRoundTrips) {
  TempDir dir("cifar_fixture");
  std::vector<std::uint8_t> bytes;
  for (int r = 0; r < 2; ++r) {
    bytes.push_back(static_cast<std::uint8_t>(r == 0 ? 6 : 1));
    for (int i = 0; i < 3072; ++i) bytes.push_back(static_cast<std::uint8_t>((i * 31 + r * 101) % 256));
  }
  binio::write_file(dir.path() / "b.bin", bytes);
  const std::vector<fs::path> paths{dir.path() / "b.bin"};
  const DatasetSplit s = load_cifar10(paths);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.images[0].label, 6);
  EXPECT_EQ(s.images[1].label, 1);
  for (int r = 0; r < 2; ++r) {
    ASSERT_EQ(s.images[static_cast<std::size_t>(r)].pixels.size(), 3072u);
    for (int i = 0; i < 3072; ++i) EXPECT_EQ(s.images[static_cast<std::size_t>(r)].pixels[static_cast<std::size_t>(i)], bytes[static_cast<std::size_t>(r * 3073 + 1 + i)]);
  }
  write_cifar10(s, dir.path() / "c.bin");
  EXPECT_EQ(binio::read_file(dir.path() / "c.bin"), bytes);
}

TEST(Cifar, RecordValidation) {
  TempDir dir("cifar_bad");
  std::vector<std::uint8_t> bytes(3073 * 2 - 1, 0);
  binio::write_file(dir.path() / "short.bin", bytes);
  std::vector<fs::path> paths{dir.path() / "short.bin"};
  EXPECT_THROW(load_cifar10(paths), FormatError);
  bytes.push_back(0);
  bytes[3073] = 10;
  binio::write_file(dir.path() / "label.bin", bytes);
  paths = {dir.path() / "label.bin"};
  EXPECT_THROW(load_cifar10(paths), FormatError);
}

TEST(Cifar, MultipleBatchesConcatenate) {
  TempDir dir("cifar_multi");
  write_cifar10(synthetic_scenes(3, 1), dir.path() / "data_batch_1.bin");
  write_cifar10(synthetic_scenes(2, 2), dir.path() / "data_batch_2.bin");
  write_cifar10(synthetic_scenes(4, 3, SplitRole::test), dir.path() / "test_batch.bin");
  EXPECT_EQ(load_split(DatasetKind::cifar10, dir.path(), SplitRole::train).size(), 5u);
  EXPECT_EQ(load_split(DatasetKind::cifar10, dir.path(), SplitRole::test).size(), 4u);
}

TEST(Normalize, ScalingAndReplication) {
  RawImage im{std::vector<std::uint8_t>(784, 0), kMnistGeometry, 0};
  im.pixels[0] = 255;
  im.pixels[5] = 51;
  const Tensor t = normalize(im);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 28, 28}));
  EXPECT_EQ(t.numel(), 2352);
  EXPECT_EQ(t.at(0, 0, 0, 0), 1.0f);
  EXPECT_EQ(t.at(0, 0, 0, 1), 0.0f);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(t.at(0, c, 0, 5), 51.0f / 255.0f);
  EXPECT_EQ(normalize(im, false).shape(), (Shape{1, 1, 28, 28}));
  EXPECT_GE(t.data().minCoeff(), 0.0f);
  EXPECT_LE(t.data().maxCoeff(), 1.0f);
}

TEST(ToBytes, RoundingAndClamping) {
  EXPECT_EQ(to_byte(1.0f), 255);
  EXPECT_EQ(to_byte(0.0f), 0);
  EXPECT_EQ(to_byte(0.5f), 128);
  EXPECT_EQ(to_byte(-3.0f), 0);
  EXPECT_EQ(to_byte(7.0f), 255);
  EXPECT_EQ(to_byte(std::nanf("")), 0);
}

TEST(ToBytes, InvertsNormalizeOnEveryByte) {
  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  EXPECT_EQ(to_bytes(normalize_bytes(all, Geometry{16, 16, 1})), all);
}

TEST(BatchIterator, PartitionArithmetic) {
  DatasetSplit s = synthetic_digits(10, 1);
  BatchIterator it(s, 3, 7);
  std::vector<std::size_t> sizes;
  std::multiset<std::size_t> seen;
  while (auto b = it.next()) {
    sizes.push_back(b->indices.size());
    EXPECT_EQ(b->images.shape().n, static_cast<std::int64_t>(b->indices.size()));
    seen.insert(b->indices.begin(), b->indices.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 3, 1}));
  std::multiset<std::size_t> all;
  for (std::size_t i = 0; i < 10; ++i) all.insert(i);
  EXPECT_EQ(seen, all);
}

TEST(BatchIterator, SeedDeterminism) {
  DatasetSplit s = synthetic_digits(20, 1);
  BatchIterator a(s, 4, 7), b(s, 4, 7), c(s, 4, 8);
  EXPECT_EQ(a.order(), b.order());
  EXPECT_NE(a.order(), c.order());
  const auto first = a.order();
  a.start_epoch(1);
  EXPECT_NE(a.order(), first);
  a.start_epoch(0);
  EXPECT_EQ(a.order(), first);
}

TEST(BatchIterator, RejectsBadArguments) {
  DatasetSplit empty;
  EXPECT_THROW(BatchIterator(empty, 4, 1), std::invalid_argument);
  DatasetSplit s = synthetic_digits(2, 1);
  EXPECT_THROW(BatchIterator(s, 0, 1), std::invalid_argument);
}

TEST(Permutation, IsAPermutation) {
  for (std::size_t n : {0u, 1u, 2u, 17u, 1000u}) {
    auto p = permutation(n, 99);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i], i);
  }
}

TEST(Subsample, SeededSubset) {
  const DatasetSplit s = synthetic_digits(50, 4);
  const DatasetSplit a = subsample(s, 10, 3);
  const DatasetSplit b = subsample(s, 10, 3);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(a.images[i].pixels, b.images[i].pixels);
  EXPECT_EQ(subsample(s, 500, 3).size(), 50u);
}

TEST(Geometry, Parsing) {
  EXPECT_EQ(parse_geometry("32x32x3"), (Geometry{32, 32, 3}));
  EXPECT_EQ(parse_geometry("28x28x1").str(), "28x28x1");
  for (const char* bad : {"", "32x32", "32x32x", "axbxc", "0x4x4", "32x32x3x1", "-1x2x3"}) {
    EXPECT_THROW(parse_geometry(bad), std::invalid_argument) << bad;
  }
}

TEST(Synthetic, DeterministicAndLabelled) {
  const DatasetSplit a = synthetic_digits(20, 11);
  const DatasetSplit b = synthetic_digits(20, 11);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.images[i].pixels, b.images[i].pixels);
    EXPECT_LE(a.images[i].label, 9);
  }
  const DatasetSplit c = synthetic_scenes(5, 11);
  EXPECT_EQ(c.geometry(), kCifarGeometry);
  EXPECT_NE(synthetic_digits(1, 12).images[0].pixels, a.images[0].pixels);
}

TEST(Synthetic, FixturesLoadThroughStandardNames) {
  TempDir dir("synthetic_fixture");
  write_synthetic_dataset(DatasetKind::mnist, dir.path() / "m", {30, 10}, 5);
  write_synthetic_dataset(DatasetKind::cifar10, dir.path() / "c", {20, 10}, 5);
  EXPECT_EQ(load_split(DatasetKind::mnist, dir.path() / "m", SplitRole::train).size(), 30u);
  EXPECT_EQ(load_split(DatasetKind::mnist, dir.path() / "m", SplitRole::test).size(), 10u);
  EXPECT_EQ(load_split(DatasetKind::cifar10, dir.path() / "c", SplitRole::train).size(), 20u);
  EXPECT_THROW(load_split(DatasetKind::cifar10, dir.path() / "m", SplitRole::train), IoError);
}
