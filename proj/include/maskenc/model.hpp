#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskenc/dataio.hpp"
#include "maskenc/errors.hpp"
#include "maskenc/masking.hpp"
#include "maskenc/ops.hpp"
#include "maskenc/optim.hpp"
#include "maskenc/tensor.hpp"

namespace maskenc {

/// What the decoder is trained to produce: the plain image directly, or the
/// masked image that the receiver XORs with the key afterwards.
enum class TargetMode { plain, masked };

/// `positional` prepends a learnable per-slot affine layer to the encoder
/// (and appends one to a masked-mode decoder); `conv_only` is the bare
/// conv/ReLU/pool/upsample stack.
enum class ArchVariant { positional, conv_only };

std::string to_string(TargetMode mode);
TargetMode parse_target_mode(const std::string& name);
std::string to_string(ArchVariant variant);
ArchVariant parse_arch_variant(const std::string& name);

enum class LayerKind : std::uint8_t { conv = 1, relu, sigmoid, maxpool, upsample, pixel_affine };

struct LayerSpec {
  LayerKind kind;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int padding = 0;

  bool operator==(const LayerSpec&) const = default;
};

struct ArchConfig {
  DatasetKind dataset = DatasetKind::cifar10;
  TargetMode target_mode = TargetMode::plain;
  ArchVariant variant = ArchVariant::positional;
  float affine_gain = 8.0f;
  Geometry input;   // MNIST: 28x28x3 with gray replication, else 28x28x1
  Geometry latent;
  Geometry output;
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;

  /// Dataset geometry and latent byte budget, then validate_shapes().
  void validate() const;
  /// Runs the shape algebra; throws GeometryError naming the failing layer.
  void validate_shapes() const;

  std::vector<std::uint8_t> serialize() const;
  static ArchConfig deserialize(std::span<const std::uint8_t> bytes);

  /// FNV-1a over serialize().
  std::uint64_t fingerprint() const;

  bool operator==(const ArchConfig&) const = default;
};

/// `replicate_gray` selects the 3-plane MNIST input (28x28x3 = 2352 bytes).
ArchConfig default_arch(DatasetKind dataset, TargetMode mode = TargetMode::plain,
                        ArchVariant variant = ArchVariant::positional, bool replicate_gray = true);

/// The same layer stack re-declared for another input size, e.g. a small
/// probe for gradient checks. Only the shape algebra is enforced.
ArchConfig probe_arch(const ArchConfig& base, Geometry input);

/// Parameter names and shapes implied by an architecture, encoder first.
struct ParamSpec {
  std::string name;
  Shape shape;
  bool is_weight = false;  // kaiming-initialised conv kernel
  float fill = 0.0f;       // initial value otherwise
};
std::vector<ParamSpec> param_specs(const ArchConfig& arch);

template <typename Scalar>
struct NamedParam {
  std::string name;
  BasicTensor<Scalar> tensor;
};

template <typename Scalar = float>
struct ModelParams {
  ArchConfig arch;
  std::vector<NamedParam<Scalar>> params;

  std::uint64_t fingerprint() const { return arch.fingerprint(); }

  std::vector<BasicTensor<Scalar>> tensors() const {
    std::vector<BasicTensor<Scalar>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
  }

  void set_requires_grad(bool flag) {
    for (auto& p : params) p.tensor.set_requires_grad(flag);
  }

  void zero_grad() {
    for (auto& p : params) p.tensor.zero_grad();
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params) n += p.tensor.numel();
    return n;
  }

  /// Deep copy in another scalar type; gradients are not carried over.
  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out{arch, {}};
    for (const auto& p : params) out.params.push_back({p.name, p.tensor.template cast<Other>()});
    return out;
  }
};

std::uint64_t layer_seed(std::uint64_t seed, std::size_t index);

/// Conv kernels via kaiming_init and zero conv biases. Per-slot affine layers
/// start as the identity (scale 1/gain, offset 0).
template <typename Scalar = float>
ModelParams<Scalar> build_model(const ArchConfig& config, std::uint64_t seed) {
  config.validate_shapes();
  ModelParams<Scalar> model{config, {}};
  const auto specs = param_specs(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& spec = specs[i];
    BasicTensor<Scalar> t = spec.is_weight ? kaiming_init<Scalar>(spec.shape, layer_seed(seed, i))
                                           : BasicTensor<Scalar>::full(spec.shape, static_cast<Scalar>(spec.fill));
    model.params.push_back({spec.name, t});
  }
  return model;
}

namespace detail {

template <typename Scalar>
BasicTensor<Scalar> run_stack(const std::vector<LayerSpec>& layers, BasicTensor<Scalar> x,
                              const ModelParams<Scalar>& model, std::size_t param_index, Tape<Scalar>* tape) {
  const auto gain = static_cast<Scalar>(model.arch.affine_gain);
  for (const auto& layer : layers) {
    switch (layer.kind) {
      case LayerKind::conv:
        x = conv2d(x, model.params.at(param_index).tensor, model.params.at(param_index + 1).tensor,
                   layer.padding, 1, tape);
        param_index += 2;
        break;
      case LayerKind::pixel_affine:
        x = pixel_affine(x, model.params.at(param_index).tensor, model.params.at(param_index + 1).tensor, gain, tape);
        param_index += 2;
        break;
      case LayerKind::relu: x = relu(x, tape); break;
      case LayerKind::sigmoid: x = sigmoid(x, tape); break;
      case LayerKind::maxpool: x = maxpool2x2(x, tape); break;
      case LayerKind::upsample: x = upsample2x(x, tape); break;
    }
  }
  return x;
}

std::size_t param_count(const std::vector<LayerSpec>& layers);

inline void expect_geometry(const Shape& s, const Geometry& g, const char* what) {
  if (s.c != g.channels || s.h != g.height || s.w != g.width) {
    throw GeometryError(std::string(what) + ": got " + s.str() + ", model expects CxHxW " +
                        std::to_string(g.channels) + "x" + std::to_string(g.height) + "x" + std::to_string(g.width));
  }
}

}  // namespace detail

/// Masked image batch [N,C,H,W] in [0,1] -> latent in (0,1).
template <typename Scalar>
BasicTensor<Scalar> encode(const BasicTensor<Scalar>& masked, const ModelParams<Scalar>& model,
                           Tape<Scalar>* tape = nullptr) {
  detail::expect_geometry(masked.shape(), model.arch.input, "encode input");
  return detail::run_stack(model.arch.encoder, masked, model, 0, tape);
}

/// Latent batch -> reconstruction in (0,1).
template <typename Scalar>
BasicTensor<Scalar> decode(const BasicTensor<Scalar>& latent, const ModelParams<Scalar>& model,
                           Tape<Scalar>* tape = nullptr) {
  detail::expect_geometry(latent.shape(), model.arch.latent, "decode input");
  return detail::run_stack(model.arch.decoder, latent, model, detail::param_count(model.arch.encoder), tape);
}

/// The transmitted ciphertext: one byte per latent value.
struct LatentCode {
  std::vector<std::uint8_t> bytes;
  Geometry geometry;
  std::uint32_t fingerprint = 0;  // low 32 bits of the architecture fingerprint

  bool operator==(const LatentCode&) const = default;
};

/// q = round(255 * s) for a single-image latent [1,C,H,W].
LatentCode quantize_latent(const Tensor& latent, std::uint64_t fingerprint);
/// q / 255 as a [1,C,H,W] tensor.
Tensor dequantize_latent(const LatentCode& code);

/// Wire form: "XLAT", u16 version, u16 C, H, W, u32 fingerprint, payload.
std::vector<std::uint8_t> encode_latent(const LatentCode& code);
LatentCode decode_latent(std::span<const std::uint8_t> bytes, const std::string& what = "latent");
void latent_save(const LatentCode& code, const std::filesystem::path& path);
LatentCode latent_load(const std::filesystem::path& path);

/// "XCKP", u32 version, arch blob, u64 fingerprint, then per tensor:
/// name, four u32 extents, little-endian f32 payload.
std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>& model);
ModelParams<float> decode_checkpoint(std::span<const std::uint8_t> bytes, const ArchConfig* expected = nullptr,
                                     const std::string& what = "checkpoint");
void save_checkpoint(const ModelParams<float>& model, const std::filesystem::path& path);
ModelParams<float> load_checkpoint(const std::filesystem::path& path, const ArchConfig* expected = nullptr);

// ---------------------------------------------------------------------------
// Sender/receiver pipeline around the network.

/// Plain image bytes -> replicated (MNIST) -> XOR mask -> [1,C,H,W] in [0,1].
Tensor masked_input(const RawImage& plain, const Mask& mask, const ArchConfig& arch);

/// Training target for one image under the architecture's target mode.
Tensor training_target(const RawImage& plain, const Mask& mask, const ArchConfig& arch);

/// Decoder output [1,C,H,W] -> plain-geometry bytes. Masked mode converts to
/// bytes, XORs with `mask` and, for gray datasets, averages the planes.
std::vector<std::uint8_t> recover_plain(const Tensor& output, const Mask& mask, const ArchConfig& arch);

/// Geometry of the plain images the architecture consumes.
Geometry plain_geometry(const ArchConfig& arch);

LatentCode encrypt_image(const RawImage& plain, const Mask& mask, const ModelParams<float>& model);
RawImage decrypt_latent(const LatentCode& code, const Mask& mask, const ModelParams<float>& model);

}  // namespace maskenc
