#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskenc/tensor.hpp"

namespace maskenc {

enum class DatasetKind { mnist, cifar10 };
enum class SplitRole { train, test };

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);

/// Image extents in pixels; pixel bytes are stored channel-planar (C, H, W).
struct Geometry {
  int height = 0;
  int width = 0;
  int channels = 0;

  constexpr std::size_t numel() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  }
  constexpr bool operator==(const Geometry&) const = default;
  std::string str() const;  // "HxWxC"
};

/// Parses "HxWxC", e.g. "32x32x3". Throws std::invalid_argument.
Geometry parse_geometry(const std::string& text);

inline constexpr Geometry kMnistGeometry{28, 28, 1};
inline constexpr Geometry kCifarGeometry{32, 32, 3};

struct RawImage {
  std::vector<std::uint8_t> pixels;
  Geometry geometry;
  std::uint8_t label = 0;
};

struct DatasetSplit {
  std::vector<RawImage> images;
  SplitRole role = SplitRole::train;
  DatasetKind source = DatasetKind::mnist;

  std::size_t size() const { return images.size(); }
  Geometry geometry() const;
};

/// IDX image + label files (big-endian header; magic 0x803 / 0x801).
DatasetSplit load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        SplitRole role = SplitRole::train);
void write_mnist(const DatasetSplit& split, const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path);

/// CIFAR-10 binary batches: 3073-byte records, label then R, G, B planes.
DatasetSplit load_cifar10(std::span<const std::filesystem::path> batch_paths, SplitRole role = SplitRole::train);
void write_cifar10(const DatasetSplit& split, const std::filesystem::path& path);

/// Standard file names inside a dataset directory.
struct DatasetFiles {
  std::vector<std::filesystem::path> train;
  std::vector<std::filesystem::path> test;
};
DatasetFiles dataset_files(DatasetKind kind, const std::filesystem::path& dir);
DatasetSplit load_split(DatasetKind kind, const std::filesystem::path& dir, SplitRole role);

/// First `count` images of a seed-determined permutation, in permutation order.
DatasetSplit subsample(const DatasetSplit& split, std::size_t count, std::uint64_t seed);

/// Copies a single gray plane into three identical planes.
std::vector<std::uint8_t> replicate_gray(std::span<const std::uint8_t> gray);

/// Bytes / 255 as a [1,C,H,W] tensor; gray images optionally become 3 planes.
Tensor normalize(const RawImage& image, bool replicate_gray_to_3 = true);
Tensor normalize_bytes(std::span<const std::uint8_t> bytes, Geometry geometry);

/// Clamp to [0,1], scale by 255, round half away from zero.
std::vector<std::uint8_t> to_bytes(const Tensor& t);
std::uint8_t to_byte(float value);

/// Seed-deterministic permutation of 0..n-1 (Fisher-Yates on mt19937_64).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

/// Shuffled mini-batches over one split. Each epoch visits every image once;
/// the last batch may be short.
class BatchIterator {
 public:
  using Transform = std::function<Tensor(const RawImage&)>;

  struct Batch {
    std::vector<std::size_t> indices;
    Tensor images;  // [B, C, H, W]
  };

  BatchIterator(const DatasetSplit& split, std::size_t batch_size, std::uint64_t shuffle_seed,
                Transform transform = {});

  /// Reshuffles for `epoch`; the order depends only on (seed, epoch).
  void start_epoch(std::uint64_t epoch);
  std::optional<Batch> next();

  const std::vector<std::size_t>& order() const { return order_; }

 private:
  const DatasetSplit* split_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  Transform transform_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Stacks [1,C,H,W] tensors into one [B,C,H,W] tensor.
Tensor stack(std::span<const Tensor> items);

}  // namespace maskenc
