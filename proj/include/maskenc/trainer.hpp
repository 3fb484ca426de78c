#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maskenc/dataio.hpp"
#include "maskenc/masking.hpp"
#include "maskenc/model.hpp"
#include "maskenc/optim.hpp"

namespace maskenc {

inline constexpr double kPsnrCapDb = 99.0;

struct TrainConfig {
  int epochs = 5;
  std::size_t batch_size = 64;
  float learning_rate = 0.001f;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t shuffle_seed = 20240611;
  std::uint64_t init_seed = 7;
  std::optional<std::size_t> subsample;
  int checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint
  std::filesystem::path checkpoint_path;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0;
  double test_mse = 0;      // NaN when no test split was given
  double test_psnr_db = 0;  // NaN when no test split was given
  double seconds = 0;
};

struct TrainHistory {
  float learning_rate = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::vector<EpochRecord> epochs;

  /// epoch,train_mse,test_mse,test_psnr_db,seconds
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainResult {
  ModelParams<float> params;
  TrainHistory history;
};

/// Per batch: mask, normalize, encode, decode, MSE against the target of
/// `arch.target_mode`, backward, optimizer step. Throws NumericalError on a
/// non-finite loss.
TrainResult train(const TrainConfig& config, const DatasetSplit& split, const Mask& mask, const ArchConfig& arch,
                  const DatasetSplit* test = nullptr,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Mean loss over every image of one batch.
double batch_loss(const ModelParams<float>& model, const DatasetSplit& split, std::span<const std::size_t> indices,
                  const Mask& mask);

struct EvalOptions {
  bool quantize = false;              // round-trip the latent through bytes
  const Mask* decrypt_mask = nullptr;  // receiver key in masked mode; defaults to the sender's
  std::size_t batch_size = 256;
};

struct EvalMetrics {
  double mean_mse = 0;
  double mean_psnr_db = 0;
  std::size_t count = 0;
  std::vector<double> per_image_mse;
};

/// Reconstruction quality against the plain images on a [0,1] scale.
EvalMetrics evaluate(const ModelParams<float>& model, const DatasetSplit& split, const Mask& mask,
                     const EvalOptions& options = {});

/// -10 log10(mse) for unit-peak signals, capped at kPsnrCapDb below 1e-10.
double psnr_from_mse(double mse);
double psnr(const Tensor& pred, const Tensor& target);

/// Image `i` of a batch as a [1,C,H,W] tensor.
Tensor slice(const Tensor& batch, std::int64_t i);

}  // namespace maskenc
