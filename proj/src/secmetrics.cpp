#include "maskenc/secmetrics.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "maskenc/errors.hpp"

namespace maskenc {

Histogram histogram(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw std::invalid_argument("histogram of an empty byte sequence");
  Histogram h{};
  for (std::uint8_t b : bytes) ++h[b];
  return h;
}

double entropy(const Histogram& hist) {
  std::uint64_t total = 0;
  for (auto c : hist) total += c;
  if (total == 0) throw std::invalid_argument("entropy of an empty histogram");
  double h = 0;
  const double n = static_cast<double>(total);
  for (auto c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

double entropy(std::span<const std::uint8_t> bytes) { return entropy(histogram(bytes)); }

double chi_square_uniform(const Histogram& hist) {
  std::uint64_t total = 0;
  for (auto c : hist) total += c;
  if (total == 0) throw std::invalid_argument("chi-square of an empty histogram");
  const double e = static_cast<double>(total) / 256.0;
  double s = 0;
  for (auto c : hist) {
    const double d = static_cast<double>(c) - e;
    s += d * d / e;
  }
  return s;
}

DistributionReport distribution_report(std::span<const std::uint8_t> bytes) {
  DistributionReport r;
  r.counts = histogram(bytes);
  r.entropy_bits = entropy(r.counts);
  r.chi_square = chi_square_uniform(r.counts);
  r.samples = bytes.size();
  return r;
}

double key_averaged_chi_square(std::span<const std::vector<std::uint8_t>> images) {
  if (images.empty() || images.front().empty()) throw std::invalid_argument("key-averaged chi-square of no images");
  const std::size_t slots = images.front().size();
  for (const auto& im : images) {
    if (im.size() != slots) throw std::invalid_argument("key-averaged chi-square needs equally sized images");
  }
  const double n = static_cast<double>(images.size());
  std::array<std::uint32_t, 256> counts{};
  double sum = 0;
  for (std::size_t p = 0; p < slots; ++p) {
    counts.fill(0);
    for (const auto& im : images) ++counts[im[p]];
    double collision = 0;
    for (auto c : counts) collision += (c / n) * (c / n);
    sum += collision - 1.0 / 256;
  }
  return 256.0 * n * sum / static_cast<double>(slots);
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::horizontal: return "horizontal";
    case Direction::vertical: return "vertical";
    case Direction::diagonal: return "diagonal";
  }
  return "?";
}

Direction parse_direction(const std::string& name) {
  if (name == "horizontal") return Direction::horizontal;
  if (name == "vertical") return Direction::vertical;
  if (name == "diagonal") return Direction::diagonal;
  throw std::invalid_argument("unknown direction '" + name + "' (horizontal, vertical, diagonal)");
}

std::optional<double> adjacent_correlation(std::span<const std::uint8_t> image, Geometry geometry,
                                           Direction direction, std::size_t n_pairs, std::uint64_t seed) {
  if (image.size() != geometry.numel()) {
    throw std::invalid_argument("correlation: " + std::to_string(image.size()) + " bytes for geometry " +
                                geometry.str());
  }
  if (n_pairs < 2) throw std::invalid_argument("correlation needs at least 2 pairs");
  const int dy = direction == Direction::horizontal ? 0 : 1;
  const int dx = direction == Direction::vertical ? 0 : 1;
  const int rows = geometry.height - dy;
  const int cols = geometry.width - dx;
  if (rows < 1 || cols < 1 || geometry.channels < 1) {
    throw std::invalid_argument("image " + geometry.str() + " too small for " + to_string(direction) + " pairs");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_c(0, geometry.channels - 1);
  std::uniform_int_distribution<int> pick_y(0, rows - 1);
  std::uniform_int_distribution<int> pick_x(0, cols - 1);
  const std::size_t plane = static_cast<std::size_t>(geometry.height) * geometry.width;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const int c = pick_c(rng);
    const int y = pick_y(rng);
    const int x = pick_x(rng);
    const std::size_t base = c * plane;
    const double a = image[base + static_cast<std::size_t>(y) * geometry.width + x];
    const double b = image[base + static_cast<std::size_t>(y + dy) * geometry.width + (x + dx)];
    sa += a;
    sb += b;
    saa += a * a;
    sbb += b * b;
    sab += a * b;
  }
  const double n = static_cast<double>(n_pairs);
  const double va = saa - sa * sa / n;
  const double vb = sbb - sb * sb / n;
  if (va <= 1e-12 || vb <= 1e-12) return std::nullopt;
  const double r = (sab - sa * sb / n) / std::sqrt(va * vb);
  return std::clamp(r, -1.0, 1.0);
}

ThroughputReport throughput_report(std::uint64_t n_images, Geometry plain, std::uint64_t latent_bytes,
                                   double rate_bps) {
  if (n_images == 0 || plain.numel() == 0 || latent_bytes == 0 || !(rate_bps > 0)) {
    throw std::invalid_argument("throughput report needs positive image count, sizes and rate");
  }
  ThroughputReport r;
  r.images = n_images;
  r.plain_bytes = plain.numel();
  r.latent_bytes = latent_bytes;
  r.rate_bps = rate_bps;
  r.plain_seconds = static_cast<double>(n_images * r.plain_bytes * 8) / rate_bps;
  r.latent_seconds = static_cast<double>(n_images * latent_bytes * 8) / rate_bps;
  r.speedup = static_cast<double>(r.plain_bytes) / static_cast<double>(latent_bytes);
  return r;
}

void write_histogram_csv(const Histogram& hist, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "value,count\n";
  for (std::size_t v = 0; v < hist.size(); ++v) out << v << ',' << hist[v] << '\n';
}

std::string format_distribution(const std::string& title, const DistributionReport& r) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(4);
  s << title << ": samples " << r.samples << ", entropy " << r.entropy_bits << " bits/byte, chi-square "
    << r.chi_square << " (0.999 quantile " << kChiSquare255Q999 << ")\n";
  return s.str();
}

std::string format_throughput(const ThroughputReport& r) {
  std::ostringstream s;
  s << "images: " << r.images << "\n"
    << "plain bytes/image: " << r.plain_bytes << "\n"
    << "latent bytes/image: " << r.latent_bytes << "\n"
    << "rate: " << r.rate_bps << " bit/s\n"
    << "plain time: " << r.plain_seconds * 1e6 << " us\n"
    << "latent time: " << r.latent_seconds * 1e6 << " us\n"
    << "speedup: " << r.speedup << "\n";
  return s.str();
}

}  // namespace maskenc
