#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskenc/dataio.hpp"

namespace maskenc {

using Histogram = std::array<std::uint64_t, 256>;

/// Throws std::invalid_argument on empty input.
Histogram histogram(std::span<const std::uint8_t> bytes);

/// Shannon entropy of the byte distribution, bits per byte.
double entropy(std::span<const std::uint8_t> bytes);
double entropy(const Histogram& hist);

/// Pearson statistic against the uniform distribution over 256 bins.
double chi_square_uniform(const Histogram& hist);

/// Upper 0.999 quantile of the chi-square distribution with 255 degrees of
/// freedom.
inline constexpr double kChiSquare255Q999 = 330.519744;

struct DistributionReport {
  Histogram counts{};
  double entropy_bits = 0;
  double chi_square = 0;
  std::uint64_t samples = 0;
};

DistributionReport distribution_report(std::span<const std::uint8_t> bytes);

/// Expected chi_square_uniform of the pooled bytes when every image is XORed
/// with one key drawn uniformly at random: 256 * n * mean over slots of
/// (collision probability of the plain values at that slot - 1/256). Equals
/// 255 only when every slot is already uniform across the n images; a fixed
/// key cannot flatten per-slot structure, so this grows linearly with n.
/// Images must share one size.
double key_averaged_chi_square(std::span<const std::vector<std::uint8_t>> images);

enum class Direction { horizontal, vertical, diagonal };
std::string to_string(Direction d);
Direction parse_direction(const std::string& name);

/// Pearson r over `n_pairs` adjacent pixel pairs drawn uniformly (with
/// replacement) from all channels. Returns nullopt when either side of the
/// sample has zero variance: the correlation is undefined there.
std::optional<double> adjacent_correlation(std::span<const std::uint8_t> image, Geometry geometry,
                                           Direction direction, std::size_t n_pairs, std::uint64_t seed);

struct ThroughputReport {
  std::uint64_t images = 0;
  std::uint64_t plain_bytes = 0;   // per image
  std::uint64_t latent_bytes = 0;  // per image
  double rate_bps = 0;
  double plain_seconds = 0;
  double latent_seconds = 0;
  double speedup = 0;
};

ThroughputReport throughput_report(std::uint64_t n_images, Geometry plain, std::uint64_t latent_bytes,
                                   double rate_bps);

/// value,count with one row per byte value.
void write_histogram_csv(const Histogram& hist, const std::filesystem::path& path);
std::string format_distribution(const std::string& title, const DistributionReport& r);
std::string format_throughput(const ThroughputReport& r);

}  // namespace maskenc
