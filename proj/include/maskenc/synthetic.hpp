#pragma once

#include <cstdint>
#include <filesystem>

#include "maskenc/dataio.hpp"

namespace maskenc {

/// Procedural stand-ins for the benchmark corpora, used when the official
/// files are not on disk. Digits are anti-aliased seven-segment strokes with
/// jittered size, slant and thickness (28x28x1); scenes are smooth colour
/// gradients with sinusoidal texture, filled ellipses and pixel noise
/// (32x32x3). Labels are uniform in 0..9. Pure functions of (count, seed).
DatasetSplit synthetic_digits(std::size_t count, std::uint64_t seed, SplitRole role = SplitRole::train);
DatasetSplit synthetic_scenes(std::size_t count, std::uint64_t seed, SplitRole role = SplitRole::train);

struct FixtureSizes {
  std::size_t train = 6000;
  std::size_t test = 1000;
};

/// Writes both splits under the standard file names so that load_split()
/// reads them back, e.g. train-images-idx3-ubyte or data_batch_1.bin.
void write_synthetic_dataset(DatasetKind kind, const std::filesystem::path& dir, FixtureSizes sizes,
                             std::uint64_t seed);

}  // namespace maskenc
