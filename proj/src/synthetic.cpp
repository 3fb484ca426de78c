#include "maskenc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

namespace maskenc {

namespace {

// Distribution code is spelled out so the corpus is identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int n) { return static_cast<int>(uniform() * n); }

  double normal(double sigma) {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return sigma * v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return sigma * r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Segment endpoints on a unit 1x2 cell: a top, b upper right, c lower right,
// d bottom, e lower left, f upper left, g middle.
constexpr std::array<std::array<double, 4>, 7> kSegments{{
    {0, 0, 1, 0},
    {1, 0, 1, 1},
    {1, 1, 1, 2},
    {0, 2, 1, 2},
    {0, 1, 0, 2},
    {0, 0, 0, 1},
    {0, 1, 1, 1},
}};

constexpr std::array<std::uint8_t, 10> kDigitSegments{
    0b0111111, 0b0000110, 0b1011011, 0b1001111, 0b1100110,
    0b1101101, 0b1111101, 0b0000111, 0b1111111, 0b1101111,
};

RawImage digit(Rng& rng) {
  constexpr int kSide = 28;
  RawImage im;
  im.geometry = kMnistGeometry;
  im.label = static_cast<std::uint8_t>(rng.integer(10));
  const double w = rng.uniform(8, 12);
  const double h = rng.uniform(8, 10);
  const double cx = rng.uniform(12, 16);
  const double cy = rng.uniform(12, 16);
  const double slant = rng.uniform(-0.3, 0.3);
  const double thick = rng.uniform(1.0, 2.0);
  auto place = [&](double x, double y, double& px, double& py) {
    py = cy + (y - 1) * h;
    px = cx + (x - 0.5) * w + slant * (y - 1) * h * 0.5;
  };
  std::vector<double> img(kSide * kSide, 0.0);
  for (int s = 0; s < 7; ++s) {
    if (!(kDigitSegments[im.label] >> s & 1)) continue;
    double ax, ay, bx, by;
    place(kSegments[s][0], kSegments[s][1], ax, ay);
    place(kSegments[s][2], kSegments[s][3], bx, by);
    ax += rng.normal(0.6);
    ay += rng.normal(0.6);
    bx += rng.normal(0.6);
    by += rng.normal(0.6);
    const double dx = bx - ax;
    const double dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    for (int y = 0; y < kSide; ++y) {
      for (int x = 0; x < kSide; ++x) {
        const double t = std::clamp(((x - ax) * dx + (y - ay) * dy) / len2, 0.0, 1.0);
        const double d = std::hypot(x - (ax + t * dx), y - (ay + t * dy));
        double& v = img[y * kSide + x];
        v = std::max(v, std::clamp(thick + 0.5 - d, 0.0, 1.0));
      }
    }
  }
  im.pixels.resize(img.size());
  std::transform(img.begin(), img.end(), im.pixels.begin(), quantize);
  return im;
}

RawImage scene(Rng& rng) {
  constexpr int kSide = 32;
  constexpr int kPlane = kSide * kSide;
  RawImage im;
  im.geometry = kCifarGeometry;
  im.label = static_cast<std::uint8_t>(rng.integer(10));
  std::vector<double> img(3 * kPlane);
  for (int c = 0; c < 3; ++c) {
    const double base = rng.uniform(0.2, 0.8);
    const double gx = rng.uniform(-0.3, 0.3);
    const double gy = rng.uniform(-0.3, 0.3);
    for (int i = 0; i < kPlane; ++i) {
      img[c * kPlane + i] = base + gx * (i % kSide) / kSide + gy * (i / kSide) / kSide;
    }
    for (int k = 0; k < 2; ++k) {
      const double f = rng.uniform(1, 4);
      const double phase = rng.uniform(0, 6.3);
      const double angle = rng.uniform(0, 6.3);
      const double amp = rng.uniform(0, 0.15);
      for (int i = 0; i < kPlane; ++i) {
        const double x = static_cast<double>(i % kSide) / kSide;
        const double y = static_cast<double>(i / kSide) / kSide;
        img[c * kPlane + i] +=
            amp * std::sin(2 * std::numbers::pi * f * (std::cos(angle) * x + std::sin(angle) * y) + phase);
      }
    }
  }
  const int blobs = 1 + rng.integer(3);
  for (int k = 0; k < blobs; ++k) {
    const double col[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double r = rng.uniform(0.1, 0.3);
    const double cx = rng.uniform();
    const double cy = rng.uniform();
    const double rx = r * rng.uniform(0.5, 1.5);
    for (int i = 0; i < kPlane; ++i) {
      const double x = static_cast<double>(i % kSide) / kSide;
      const double y = static_cast<double>(i / kSide) / kSide;
      if ((x - cx) * (x - cx) / (rx * rx) + (y - cy) * (y - cy) / (r * r) >= 1) continue;
      for (int c = 0; c < 3; ++c) img[c * kPlane + i] = col[c] + 0.1 * (y - cy);
    }
  }
  im.pixels.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) im.pixels[i] = quantize(img[i] + rng.normal(0.03));
  return im;
}

template <typename Gen>
DatasetSplit generate(std::size_t count, std::uint64_t seed, SplitRole role, DatasetKind kind, Gen gen) {
  Rng rng(seed);
  DatasetSplit split{{}, role, kind};
  split.images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) split.images.push_back(gen(rng));
  return split;
}

}  // namespace

DatasetSplit synthetic_digits(std::size_t count, std::uint64_t seed, SplitRole role) {
  return generate(count, seed, role, DatasetKind::mnist, digit);
}

DatasetSplit synthetic_scenes(std::size_t count, std::uint64_t seed, SplitRole role) {
  return generate(count, seed, role, DatasetKind::cifar10, scene);
}

void write_synthetic_dataset(DatasetKind kind, const std::filesystem::path& dir, FixtureSizes sizes,
                             std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const std::uint64_t test_seed = seed ^ 0x5DEECE66DULL;
  if (kind == DatasetKind::mnist) {
    write_mnist(synthetic_digits(sizes.train, seed), dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    write_mnist(synthetic_digits(sizes.test, test_seed, SplitRole::test), dir / "t10k-images-idx3-ubyte",
                dir / "t10k-labels-idx1-ubyte");
    return;
  }
  write_cifar10(synthetic_scenes(sizes.train, seed), dir / "data_batch_1.bin");
  write_cifar10(synthetic_scenes(sizes.test, test_seed, SplitRole::test), dir / "test_batch.bin");
}

}  // namespace maskenc
