#include "maskenc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace maskenc {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(learning_rate > 0.0f)) throw std::invalid_argument("learning rate must be > 0");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint cadence must be >= 0");
  if (checkpoint_every > 0 && checkpoint_path.empty()) {
    throw std::invalid_argument("checkpoint cadence set without a checkpoint path");
  }
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_mse,test_mse,test_psnr_db,seconds\n";
  out << std::setprecision(9);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_mse << ',' << e.test_mse << ',' << e.test_psnr_db << ',' << e.seconds << '\n';
  }
}

Tensor slice(const Tensor& batch, std::int64_t i) {
  const Shape& s = batch.shape();
  if (i < 0 || i >= s.n) throw std::out_of_range("slice index " + std::to_string(i) + " outside " + s.str());
  const std::int64_t k = s.c * s.h * s.w;
  return Tensor(Shape{1, s.c, s.h, s.w}, batch.data().segment(i * k, k));
}

double psnr_from_mse(double mse) {
  if (mse < 1e-10) return kPsnrCapDb;
  return std::min(kPsnrCapDb, -10.0 * std::log10(mse));
}

double psnr(const Tensor& pred, const Tensor& target) {
  return psnr_from_mse(static_cast<double>(mse(pred, target).item()));
}

namespace {

struct BatchTensors {
  Tensor inputs;
  Tensor targets;
};

BatchTensors assemble(const DatasetSplit& split, std::span<const std::size_t> indices, const Mask& mask,
                      const ArchConfig& arch) {
  std::vector<Tensor> in;
  std::vector<Tensor> tg;
  in.reserve(indices.size());
  tg.reserve(indices.size());
  for (std::size_t idx : indices) {
    in.push_back(masked_input(split.images[idx], mask, arch));
    tg.push_back(training_target(split.images[idx], mask, arch));
  }
  return {stack(in), stack(tg)};
}

}  // namespace

double batch_loss(const ModelParams<float>& model, const DatasetSplit& split, std::span<const std::size_t> indices,
                  const Mask& mask) {
  const auto b = assemble(split, indices, mask, model.arch);
  return mse(decode(encode(b.inputs, model), model), b.targets).item();
}

TrainResult train(const TrainConfig& config, const DatasetSplit& split, const Mask& mask, const ArchConfig& arch,
                  const DatasetSplit* test, const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  arch.validate();
  if (split.images.empty()) throw std::invalid_argument("training split is empty");
  if (mask.geometry != arch.input) {
    throw GeometryError("mask geometry " + mask.geometry.str() + " does not match model input " + arch.input.str());
  }
  if (split.geometry() != plain_geometry(arch)) {
    throw GeometryError("training images are " + split.geometry().str() + ", model expects " +
                        plain_geometry(arch).str());
  }
  const DatasetSplit data = config.subsample ? subsample(split, *config.subsample, config.shuffle_seed) : split;

  TrainResult result{build_model<float>(arch, config.init_seed), {}};
  result.history.learning_rate = config.learning_rate;
  result.history.optimizer = config.optimizer;
  auto& model = result.params;
  model.set_requires_grad(true);
  std::vector<Tensor> params = model.tensors();
  AdamState<float> adam;
  Tape<float> tape;

  // Index-only iteration; tensors are assembled per batch below.
  BatchIterator batches(data, config.batch_size, config.shuffle_seed);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    batches.start_epoch(static_cast<std::uint64_t>(epoch - 1));
    double weighted = 0;
    std::size_t seen = 0;
    std::size_t batch_no = 0;
    while (auto batch = batches.next()) {
      ++batch_no;
      const auto b = assemble(data, batch->indices, mask, arch);
      tape.reset();
      model.zero_grad();
      const Tensor loss = mse(decode(encode(b.inputs, model, &tape), model, &tape), b.targets, &tape);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_no));
      }
      tape.backward(loss);
      if (config.optimizer == OptimizerKind::adam) {
        adam_step<float>(params, adam, config.learning_rate);
      } else {
        sgd_step<float>(params, config.learning_rate);
      }
      weighted += value * static_cast<double>(batch->indices.size());
      seen += batch->indices.size();
    }
    tape.reset();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_mse = weighted / static_cast<double>(seen);
    rec.test_mse = std::numeric_limits<double>::quiet_NaN();
    rec.test_psnr_db = std::numeric_limits<double>::quiet_NaN();
    if (test != nullptr && !test->images.empty()) {
      const auto m = evaluate(model, *test, mask);
      rec.test_mse = m.mean_mse;
      rec.test_psnr_db = m.mean_psnr_db;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0 && epoch != config.epochs) {
      save_checkpoint(model, config.checkpoint_path);
    }
  }
  model.set_requires_grad(false);
  if (!config.checkpoint_path.empty()) save_checkpoint(model, config.checkpoint_path);
  return result;
}

EvalMetrics evaluate(const ModelParams<float>& model, const DatasetSplit& split, const Mask& mask,
                     const EvalOptions& options) {
  if (split.images.empty()) throw std::invalid_argument("cannot evaluate an empty split");
  if (options.batch_size == 0) throw std::invalid_argument("evaluation batch size must be >= 1");
  const ArchConfig& arch = model.arch;
  const Mask& receiver = options.decrypt_mask != nullptr ? *options.decrypt_mask : mask;
  EvalMetrics m;
  double psnr_sum = 0;
  for (std::size_t start = 0; start < split.size(); start += options.batch_size) {
    const std::size_t end = std::min(split.size(), start + options.batch_size);
    std::vector<Tensor> in;
    for (std::size_t i = start; i < end; ++i) in.push_back(masked_input(split.images[i], mask, arch));
    Tensor latent = encode(stack(in), model);
    if (options.quantize) {
      const auto q = to_bytes(latent);
      Tensor::Array a(static_cast<Eigen::Index>(q.size()));
      for (std::size_t j = 0; j < q.size(); ++j) a[static_cast<Eigen::Index>(j)] = static_cast<float>(q[j]) / 255.0f;
      latent = Tensor(latent.shape(), std::move(a));
    }
    const Tensor out = decode(latent, model);
    for (std::size_t i = start; i < end; ++i) {
      const RawImage& plain = split.images[i];
      const Tensor target = normalize_bytes(plain.pixels, plain.geometry);
      Tensor pred = slice(out, static_cast<std::int64_t>(i - start));
      if (arch.target_mode == TargetMode::masked) pred = normalize_bytes(recover_plain(pred, receiver, arch), plain.geometry);
      const double e = mse(pred, target).item();
      m.per_image_mse.push_back(e);
      m.mean_mse += e;
      psnr_sum += psnr_from_mse(e);
    }
  }
  m.count = split.size();
  m.mean_mse /= static_cast<double>(m.count);
  m.mean_psnr_db = psnr_sum / static_cast<double>(m.count);
  return m;
}

}  // namespace maskenc
