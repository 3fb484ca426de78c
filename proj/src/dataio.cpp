#include "maskenc/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "maskenc/binio.hpp"
#include "maskenc/errors.hpp"

namespace maskenc {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
constexpr std::size_t kCifarRecord = 1 + 3072;

void check_label(std::uint8_t label, const std::string& where) {
  if (label > 9) throw FormatError(where + ": label " + std::to_string(label) + " outside 0..9");
}

}  // namespace

std::string to_string(DatasetKind kind) { return kind == DatasetKind::mnist ? "mnist" : "cifar10"; }

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "mnist") return DatasetKind::mnist;
  if (name == "cifar10" || name == "cifar") return DatasetKind::cifar10;
  throw std::invalid_argument("unknown dataset '" + name + "' (expected mnist or cifar10)");
}

std::string Geometry::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

Geometry parse_geometry(const std::string& text) {
  Geometry g;
  int* fields[] = {&g.height, &g.width, &g.channels};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const std::size_t end = i < 2 ? text.find('x', pos) : text.size();
    if (end == std::string::npos || end == pos) throw std::invalid_argument("malformed geometry '" + text + "'");
    const std::string part = text.substr(pos, end - pos);
    if (!std::all_of(part.begin(), part.end(), [](char ch) { return ch >= '0' && ch <= '9'; }) ||
        part.size() > 5) {
      throw std::invalid_argument("malformed geometry '" + text + "'");
    }
    *fields[i] = std::stoi(part);
    if (*fields[i] <= 0) throw std::invalid_argument("geometry dims must be positive: '" + text + "'");
    pos = end + 1;
  }
  return g;
}

Geometry DatasetSplit::geometry() const {
  if (images.empty()) return source == DatasetKind::mnist ? kMnistGeometry : kCifarGeometry;
  return images.front().geometry;
}

DatasetSplit load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                        SplitRole role) {
  const auto img = binio::read_file(images_path);
  const auto lab = binio::read_file(labels_path);
  const std::string iname = images_path.string();
  const std::string lname = labels_path.string();
  if (img.size() < 16) throw FormatError(iname + ": truncated IDX header");
  if (lab.size() < 8) throw FormatError(lname + ": truncated IDX header");
  if (binio::load_be32(img.data()) != kIdxImagesMagic) {
    throw FormatError(iname + ": bad magic, expected 0x00000803 (3-D unsigned byte)");
  }
  if (binio::load_be32(lab.data()) != kIdxLabelsMagic) {
    throw FormatError(lname + ": bad magic, expected 0x00000801 (1-D unsigned byte)");
  }
  const std::size_t count = binio::load_be32(img.data() + 4);
  const std::size_t rows = binio::load_be32(img.data() + 8);
  const std::size_t cols = binio::load_be32(img.data() + 12);
  const std::size_t label_count = binio::load_be32(lab.data() + 4);
  if (rows != 28 || cols != 28) {
    throw FormatError(iname + ": expected 28x28 images, header says " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  if (count != label_count) {
    throw FormatError("image count " + std::to_string(count) + " in " + iname + " != label count " +
                      std::to_string(label_count) + " in " + lname);
  }
  const std::size_t per = rows * cols;
  if (img.size() != 16 + count * per) throw FormatError(iname + ": payload length does not match header count");
  if (lab.size() != 8 + count) throw FormatError(lname + ": payload length does not match header count");

  DatasetSplit split{{}, role, DatasetKind::mnist};
  split.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    RawImage im;
    im.geometry = kMnistGeometry;
    im.pixels.assign(img.begin() + static_cast<std::ptrdiff_t>(16 + i * per),
                     img.begin() + static_cast<std::ptrdiff_t>(16 + (i + 1) * per));
    im.label = lab[8 + i];
    check_label(im.label, lname);
    split.images.push_back(std::move(im));
  }
  return split;
}

void write_mnist(const DatasetSplit& split, const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path) {
  std::vector<std::uint8_t> img;
  std::vector<std::uint8_t> lab;
  binio::append_be32(img, kIdxImagesMagic);
  binio::append_be32(img, static_cast<std::uint32_t>(split.size()));
  binio::append_be32(img, 28);
  binio::append_be32(img, 28);
  binio::append_be32(lab, kIdxLabelsMagic);
  binio::append_be32(lab, static_cast<std::uint32_t>(split.size()));
  for (const auto& im : split.images) {
    if (im.geometry != kMnistGeometry) throw GeometryError("write_mnist: image geometry " + im.geometry.str());
    img.insert(img.end(), im.pixels.begin(), im.pixels.end());
    lab.push_back(im.label);
  }
  binio::write_file(images_path, img);
  binio::write_file(labels_path, lab);
}

DatasetSplit load_cifar10(std::span<const std::filesystem::path> batch_paths, SplitRole role) {
  DatasetSplit split{{}, role, DatasetKind::cifar10};
  for (const auto& path : batch_paths) {
    const auto bytes = binio::read_file(path);
    if (bytes.size() % kCifarRecord != 0) {
      throw FormatError(path.string() + ": size " + std::to_string(bytes.size()) +
                        " is not a multiple of the 3073-byte record");
    }
    const std::size_t records = bytes.size() / kCifarRecord;
    for (std::size_t r = 0; r < records; ++r) {
      const auto* rec = bytes.data() + r * kCifarRecord;
      RawImage im;
      im.geometry = kCifarGeometry;
      im.label = rec[0];
      check_label(im.label, path.string());
      // Records are already channel-planar (R plane, G plane, B plane).
      im.pixels.assign(rec + 1, rec + kCifarRecord);
      split.images.push_back(std::move(im));
    }
  }
  return split;
}

void write_cifar10(const DatasetSplit& split, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out;
  out.reserve(split.size() * kCifarRecord);
  for (const auto& im : split.images) {
    if (im.geometry != kCifarGeometry) throw GeometryError("write_cifar10: image geometry " + im.geometry.str());
    out.push_back(im.label);
    out.insert(out.end(), im.pixels.begin(), im.pixels.end());
  }
  binio::write_file(path, out);
}

DatasetFiles dataset_files(DatasetKind kind, const std::filesystem::path& dir) {
  DatasetFiles files;
  if (kind == DatasetKind::mnist) {
    files.train = {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte"};
    files.test = {dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
    return files;
  }
  std::filesystem::path base = dir;
  if (!std::filesystem::exists(base / "test_batch.bin") && std::filesystem::exists(dir / "cifar-10-batches-bin")) {
    base = dir / "cifar-10-batches-bin";
  }
  for (int i = 1; i <= 5; ++i) {
    const auto p = base / ("data_batch_" + std::to_string(i) + ".bin");
    if (i == 1 || std::filesystem::exists(p)) files.train.push_back(p);
  }
  files.test = {base / "test_batch.bin"};
  return files;
}

DatasetSplit load_split(DatasetKind kind, const std::filesystem::path& dir, SplitRole role) {
  const DatasetFiles files = dataset_files(kind, dir);
  const auto& paths = role == SplitRole::train ? files.train : files.test;
  for (const auto& p : paths) {
    if (!std::filesystem::exists(p)) throw IoError("missing dataset file " + p.string());
  }
  if (kind == DatasetKind::mnist) return load_mnist(paths[0], paths[1], role);
  return load_cifar10(paths, role);
}

DatasetSplit subsample(const DatasetSplit& split, std::size_t count, std::uint64_t seed) {
  if (count >= split.size()) return split;
  DatasetSplit out{{}, split.role, split.source};
  const auto order = permutation(split.size(), seed);
  out.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.images.push_back(split.images[order[i]]);
  return out;
}

std::vector<std::uint8_t> replicate_gray(std::span<const std::uint8_t> gray) {
  std::vector<std::uint8_t> out;
  out.reserve(gray.size() * 3);
  for (int c = 0; c < 3; ++c) out.insert(out.end(), gray.begin(), gray.end());
  return out;
}

Tensor normalize_bytes(std::span<const std::uint8_t> bytes, Geometry geometry) {
  if (bytes.size() != geometry.numel()) {
    throw GeometryError("normalize: " + std::to_string(bytes.size()) + " bytes for geometry " + geometry.str());
  }
  Tensor t(Shape{1, geometry.channels, geometry.height, geometry.width});
  auto& d = t.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) d[static_cast<Eigen::Index>(i)] = static_cast<float>(bytes[i]) / 255.0f;
  return t;
}

Tensor normalize(const RawImage& image, bool replicate_gray_to_3) {
  if (replicate_gray_to_3 && image.geometry.channels == 1) {
    Geometry g = image.geometry;
    g.channels = 3;
    return normalize_bytes(replicate_gray(image.pixels), g);
  }
  return normalize_bytes(image.pixels, image.geometry);
}

std::uint8_t to_byte(float value) {
  if (std::isnan(value)) return 0;
  const double v = std::clamp(static_cast<double>(value), 0.0, 1.0);
  // std::round rounds halves away from zero.
  return static_cast<std::uint8_t>(std::round(v * 255.0));
}

std::vector<std::uint8_t> to_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(t.numel()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(t.data()[static_cast<Eigen::Index>(i)]);
  return out;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    // Unbiased draw from [0, i) by rejection.
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(order[i - 1], order[r % bound]);
  }
  return order;
}

BatchIterator::BatchIterator(const DatasetSplit& split, std::size_t batch_size, std::uint64_t shuffle_seed,
                             Transform transform)
    : split_(&split), batch_size_(batch_size), seed_(shuffle_seed), transform_(std::move(transform)) {
  if (batch_size_ == 0) throw std::invalid_argument("batch size must be >= 1");
  if (split.images.empty()) throw std::invalid_argument("cannot iterate an empty dataset split");
  if (!transform_) transform_ = [](const RawImage& im) { return normalize(im); };
  start_epoch(0);
}

void BatchIterator::start_epoch(std::uint64_t epoch) {
  order_ = permutation(split_->size(), seed_ ^ (0x9E3779B97F4A7C15ULL * (epoch + 1)));
  cursor_ = 0;
}

std::optional<BatchIterator::Batch> BatchIterator::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  Batch batch;
  std::vector<Tensor> items;
  for (std::size_t i = cursor_; i < end; ++i) {
    batch.indices.push_back(order_[i]);
    items.push_back(transform_(split_->images[order_[i]]));
  }
  cursor_ = end;
  batch.images = stack(items);
  return batch;
}

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw std::invalid_argument("stack: no tensors");
  const Shape one = items.front().shape();
  if (one.n != 1) throw std::invalid_argument("stack: expected [1,C,H,W] items, got " + one.str());
  Tensor out(Shape{static_cast<std::int64_t>(items.size()), one.c, one.h, one.w});
  const std::int64_t k = one.numel();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].shape() != one) throw std::invalid_argument("stack: mixed shapes " + one.str() + " and " + items[i].shape().str());
    out.data().segment(static_cast<std::int64_t>(i) * k, k) = items[i].data();
  }
  return out;
}

}  // namespace maskenc
