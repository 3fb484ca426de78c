#include "maskenc/model.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

#include "maskenc/binio.hpp"

namespace maskenc {

namespace {

constexpr std::uint8_t kLatentMagic[4] = {'X', 'L', 'A', 'T'};
constexpr std::uint16_t kLatentVersion = 1;
constexpr std::uint8_t kCheckpointMagic[4] = {'X', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

LayerSpec conv(int in, int out) { return {LayerKind::conv, in, out, 3, 1}; }
LayerSpec affine(int channels) { return {LayerKind::pixel_affine, channels, channels, 0, 0}; }
LayerSpec relu() { return {LayerKind::relu}; }
LayerSpec sigmoid() { return {LayerKind::sigmoid}; }
LayerSpec pool() { return {LayerKind::maxpool}; }
LayerSpec up() { return {LayerKind::upsample}; }

const char* layer_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::upsample: return "upsample";
    case LayerKind::pixel_affine: return "pixel_affine";
  }
  return "?";
}

Geometry walk(const std::vector<LayerSpec>& layers, Geometry g, const char* stack) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string where = std::string(stack) + " layer " + std::to_string(i) + " (" + layer_name(l.kind) + ")";
    switch (l.kind) {
      case LayerKind::conv: {
        if (l.in_channels != g.channels) {
          throw GeometryError(where + ": expects " + std::to_string(l.in_channels) + " input channels, receives " +
                              std::to_string(g.channels));
        }
        if (l.kernel <= 0 || l.out_channels <= 0 || l.padding < 0) throw GeometryError(where + ": invalid kernel spec");
        const int h = g.height + 2 * l.padding - l.kernel + 1;
        const int w = g.width + 2 * l.padding - l.kernel + 1;
        if (h <= 0 || w <= 0) throw GeometryError(where + ": kernel larger than padded input " + g.str());
        g = {h, w, l.out_channels};
        break;
      }
      case LayerKind::pixel_affine:
        if (l.in_channels != g.channels || l.out_channels != g.channels) {
          throw GeometryError(where + ": channel count " + std::to_string(l.in_channels) + " vs input " +
                              std::to_string(g.channels));
        }
        break;
      case LayerKind::maxpool:
        if (g.height % 2 != 0 || g.width % 2 != 0) throw GeometryError(where + ": odd spatial dims " + g.str());
        g.height /= 2;
        g.width /= 2;
        break;
      case LayerKind::upsample:
        g.height *= 2;
        g.width *= 2;
        break;
      case LayerKind::relu:
      case LayerKind::sigmoid:
        break;
    }
  }
  return g;
}

void append_geometry(std::vector<std::uint8_t>& out, const Geometry& g) {
  binio::append_le16(out, static_cast<std::uint16_t>(g.height));
  binio::append_le16(out, static_cast<std::uint16_t>(g.width));
  binio::append_le16(out, static_cast<std::uint16_t>(g.channels));
}

Geometry read_geometry(binio::Reader& r) {
  Geometry g;
  g.height = r.le16();
  g.width = r.le16();
  g.channels = r.le16();
  return g;
}

void append_layers(std::vector<std::uint8_t>& out, const std::vector<LayerSpec>& layers) {
  binio::append_le16(out, static_cast<std::uint16_t>(layers.size()));
  for (const auto& l : layers) {
    out.push_back(static_cast<std::uint8_t>(l.kind));
    binio::append_le16(out, static_cast<std::uint16_t>(l.in_channels));
    binio::append_le16(out, static_cast<std::uint16_t>(l.out_channels));
    out.push_back(static_cast<std::uint8_t>(l.kernel));
    out.push_back(static_cast<std::uint8_t>(l.padding));
  }
}

std::vector<LayerSpec> read_layers(binio::Reader& r) {
  std::vector<LayerSpec> layers(r.le16(), LayerSpec{LayerKind::relu});
  for (auto& l : layers) {
    const std::uint8_t kind = r.u8();
    if (kind < 1 || kind > 6) throw FormatError("unknown layer kind " + std::to_string(kind));
    l.kind = static_cast<LayerKind>(kind);
    l.in_channels = r.le16();
    l.out_channels = r.le16();
    l.kernel = r.u8();
    l.padding = r.u8();
  }
  return layers;
}

}  // namespace

std::string to_string(TargetMode mode) { return mode == TargetMode::plain ? "plain" : "masked"; }

TargetMode parse_target_mode(const std::string& name) {
  if (name == "plain") return TargetMode::plain;
  if (name == "masked") return TargetMode::masked;
  throw std::invalid_argument("unknown target mode '" + name + "' (expected plain or masked)");
}

std::string to_string(ArchVariant variant) {
  return variant == ArchVariant::positional ? "positional" : "conv-only";
}

ArchVariant parse_arch_variant(const std::string& name) {
  if (name == "positional" || name == "default") return ArchVariant::positional;
  if (name == "conv-only") return ArchVariant::conv_only;
  throw std::invalid_argument("unknown architecture '" + name + "' (expected positional or conv-only)");
}

ArchConfig default_arch(DatasetKind dataset, TargetMode mode, ArchVariant variant, bool replicate_gray) {
  ArchConfig a;
  a.dataset = dataset;
  a.target_mode = mode;
  a.variant = variant;
  const bool positional = variant == ArchVariant::positional;
  if (dataset == DatasetKind::cifar10) {
    a.input = kCifarGeometry;
    a.latent = {8, 8, 16};
    a.output = kCifarGeometry;
    if (positional) a.encoder.push_back(affine(3));
    a.encoder.insert(a.encoder.end(), {conv(3, 16), relu(), pool(), conv(16, 16), relu(), pool(), conv(16, 16), sigmoid()});
    a.decoder = {conv(16, 16), relu(), up(), conv(16, 16), relu(), up(), conv(16, 3)};
  } else {
    const int in = replicate_gray ? 3 : 1;
    const int out = mode == TargetMode::plain ? 1 : in;
    a.input = {28, 28, in};
    a.latent = {14, 14, 4};
    a.output = {28, 28, out};
    if (positional) a.encoder.push_back(affine(in));
    a.encoder.insert(a.encoder.end(), {conv(in, 8), relu(), pool(), conv(8, 4), sigmoid()});
    a.decoder = {conv(4, 8), relu(), up(), conv(8, 8), relu(), conv(8, out)};
  }
  if (positional && mode == TargetMode::masked) a.decoder.push_back(affine(a.output.channels));
  a.decoder.push_back(sigmoid());
  a.validate();
  return a;
}

void ArchConfig::validate() const {
  const Geometry plain = dataset == DatasetKind::mnist ? kMnistGeometry : kCifarGeometry;
  const bool input_ok = dataset == DatasetKind::mnist
                            ? (input == Geometry{28, 28, 3} || input == kMnistGeometry)
                            : input == kCifarGeometry;
  if (!input_ok) {
    throw GeometryError("input geometry " + input.str() + " does not match " + maskenc::to_string(dataset));
  }
  const std::size_t latent_bytes = dataset == DatasetKind::mnist ? 784 : 1024;
  if (latent.numel() != latent_bytes) {
    throw GeometryError("latent " + latent.str() + " holds " + std::to_string(latent.numel()) + " values; " +
                        maskenc::to_string(dataset) + " requires " + std::to_string(latent_bytes));
  }
  const Geometry want_out = target_mode == TargetMode::plain ? plain : input;
  if (output != want_out) {
    throw GeometryError("output geometry " + output.str() + " does not match " + maskenc::to_string(target_mode) +
                        " target " + want_out.str());
  }
  validate_shapes();
}

void ArchConfig::validate_shapes() const {
  if (const Geometry g = walk(encoder, input, "encoder"); g != latent) {
    throw GeometryError("encoder produces " + g.str() + " but declared latent is " + latent.str());
  }
  if (const Geometry g = walk(decoder, latent, "decoder"); g != output) {
    throw GeometryError("decoder produces " + g.str() + " but declared output is " + output.str());
  }
}

ArchConfig probe_arch(const ArchConfig& base, Geometry input) {
  ArchConfig a = base;
  a.input = input;
  a.latent = walk(a.encoder, input, "encoder");
  a.output = walk(a.decoder, a.latent, "decoder");
  return a;
}

std::vector<std::uint8_t> ArchConfig::serialize() const {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(dataset));
  out.push_back(static_cast<std::uint8_t>(target_mode));
  out.push_back(static_cast<std::uint8_t>(variant));
  binio::append_le32(out, std::bit_cast<std::uint32_t>(affine_gain));
  append_geometry(out, input);
  append_geometry(out, latent);
  append_geometry(out, output);
  append_layers(out, encoder);
  append_layers(out, decoder);
  return out;
}

ArchConfig ArchConfig::deserialize(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes, "architecture");
  ArchConfig a;
  const auto dataset = r.u8();
  const auto mode = r.u8();
  const auto variant = r.u8();
  if (dataset > 1 || mode > 1 || variant > 1) throw FormatError("architecture: bad enum field");
  a.dataset = static_cast<DatasetKind>(dataset);
  a.target_mode = static_cast<TargetMode>(mode);
  a.variant = static_cast<ArchVariant>(variant);
  a.affine_gain = std::bit_cast<float>(r.le32());
  a.input = read_geometry(r);
  a.latent = read_geometry(r);
  a.output = read_geometry(r);
  a.encoder = read_layers(r);
  a.decoder = read_layers(r);
  if (r.remaining() != 0) throw FormatError("architecture: trailing bytes");
  return a;
}

std::uint64_t ArchConfig::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : serialize()) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<ParamSpec> param_specs(const ArchConfig& arch) {
  std::vector<ParamSpec> specs;
  auto add = [&](const std::vector<LayerSpec>& layers, const char* prefix, Geometry g) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string base = std::string(prefix) + "." + std::to_string(i);
      if (l.kind == LayerKind::conv) {
        specs.push_back({base + ".weight", Shape{l.out_channels, l.in_channels, l.kernel, l.kernel}, true});
        specs.push_back({base + ".bias", Shape{1, l.out_channels, 1, 1}, false});
      } else if (l.kind == LayerKind::pixel_affine) {
        specs.push_back({base + ".scale", Shape{1, g.channels, g.height, g.width}, false, 1.0f / arch.affine_gain});
        specs.push_back({base + ".offset", Shape{1, g.channels, g.height, g.width}, false});
      }
      g = walk({l}, g, prefix);
    }
  };
  add(arch.encoder, "encoder", arch.input);
  add(arch.decoder, "decoder", arch.latent);
  return specs;
}

std::uint64_t layer_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 of (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace detail {

std::size_t param_count(const std::vector<LayerSpec>& layers) {
  return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const LayerSpec& l) {
           return l.kind == LayerKind::conv || l.kind == LayerKind::pixel_affine;
         })) * 2;
}

}  // namespace detail

// ---------------------------------------------------------------------------

LatentCode quantize_latent(const Tensor& latent, std::uint64_t fingerprint) {
  const Shape& s = latent.shape();
  if (s.n != 1) throw GeometryError("quantize_latent expects a single image, got " + s.str());
  return LatentCode{to_bytes(latent), Geometry{static_cast<int>(s.h), static_cast<int>(s.w), static_cast<int>(s.c)},
                    static_cast<std::uint32_t>(fingerprint)};
}

Tensor dequantize_latent(const LatentCode& code) {
  if (code.bytes.size() != code.geometry.numel()) throw GeometryError("latent payload does not match its geometry");
  return normalize_bytes(code.bytes, code.geometry);
}

std::vector<std::uint8_t> encode_latent(const LatentCode& code) {
  if (code.bytes.size() != code.geometry.numel()) throw GeometryError("latent payload does not match its geometry");
  std::vector<std::uint8_t> out(std::begin(kLatentMagic), std::end(kLatentMagic));
  binio::append_le16(out, kLatentVersion);
  binio::append_le16(out, static_cast<std::uint16_t>(code.geometry.channels));
  binio::append_le16(out, static_cast<std::uint16_t>(code.geometry.height));
  binio::append_le16(out, static_cast<std::uint16_t>(code.geometry.width));
  binio::append_le32(out, code.fingerprint);
  out.insert(out.end(), code.bytes.begin(), code.bytes.end());
  return out;
}

LatentCode decode_latent(std::span<const std::uint8_t> bytes, const std::string& what) {
  binio::Reader r(bytes, what);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kLatentMagic))) throw FormatError(what + ": not a latent file");
  if (const auto v = r.le16(); v != kLatentVersion) throw FormatError(what + ": unsupported version " + std::to_string(v));
  LatentCode code;
  code.geometry.channels = r.le16();
  code.geometry.height = r.le16();
  code.geometry.width = r.le16();
  code.fingerprint = r.le32();
  if (r.remaining() != code.geometry.numel()) {
    throw FormatError(what + ": payload has " + std::to_string(r.remaining()) + " bytes, header declares " +
                      std::to_string(code.geometry.numel()));
  }
  const auto payload = r.take(code.geometry.numel());
  code.bytes.assign(payload.begin(), payload.end());
  return code;
}

void latent_save(const LatentCode& code, const std::filesystem::path& path) {
  binio::write_file(path, encode_latent(code));
}

LatentCode latent_load(const std::filesystem::path& path) {
  return decode_latent(binio::read_file(path), path.string());
}

std::vector<std::uint8_t> encode_checkpoint(const ModelParams<float>& model) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  binio::append_le32(out, kCheckpointVersion);
  const auto arch = model.arch.serialize();
  binio::append_le32(out, static_cast<std::uint32_t>(arch.size()));
  out.insert(out.end(), arch.begin(), arch.end());
  binio::append_le64(out, model.fingerprint());
  binio::append_le32(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& p : model.params) {
    binio::append_le16(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const Shape& s = p.tensor.shape();
    for (auto d : {s.n, s.c, s.h, s.w}) binio::append_le32(out, static_cast<std::uint32_t>(d));
    for (float v : p.tensor.data()) binio::append_le32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelParams<float> decode_checkpoint(std::span<const std::uint8_t> bytes, const ArchConfig* expected,
                                     const std::string& what) {
  binio::Reader r(bytes, what);
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), std::begin(kCheckpointMagic))) throw FormatError(what + ": not a checkpoint");
  if (const auto v = r.le32(); v != kCheckpointVersion) throw FormatError(what + ": unsupported version " + std::to_string(v));
  const auto arch_len = r.le32();
  ModelParams<float> model{ArchConfig::deserialize(r.take(arch_len)), {}};
  const std::uint64_t stored = r.le64();
  if (stored != model.arch.fingerprint()) throw FormatError(what + ": architecture fingerprint does not match its header");
  if (expected != nullptr && expected->fingerprint() != stored) {
    throw GeometryError(what + ": fingerprint mismatch, checkpoint holds a " + maskenc::to_string(model.arch.dataset) +
                        "/" + maskenc::to_string(model.arch.target_mode) + " model but a " +
                        maskenc::to_string(expected->dataset) + "/" + maskenc::to_string(expected->target_mode) +
                        " model was requested");
  }
  try {
    model.arch.validate();
  } catch (const GeometryError& e) {
    throw FormatError(what + ": invalid architecture: " + e.what());
  }
  const auto specs = param_specs(model.arch);
  const std::uint32_t count = r.le32();
  if (count != specs.size()) throw FormatError(what + ": tensor count " + std::to_string(count) + " does not match architecture");
  for (const auto& spec : specs) {
    const auto name_len = r.le16();
    const auto name = r.take(name_len);
    NamedParam<float> p{std::string(name.begin(), name.end()), Tensor()};
    if (p.name != spec.name) throw FormatError(what + ": expected tensor " + spec.name + ", found " + p.name);
    Shape s;
    s.n = r.le32();
    s.c = r.le32();
    s.h = r.le32();
    s.w = r.le32();
    if (s != spec.shape) throw FormatError(what + ": tensor " + p.name + " has shape " + s.str() + ", expected " + spec.shape.str());
    p.tensor = Tensor(s);
    for (auto& v : p.tensor.data()) v = r.f32();
    model.params.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after last tensor");
  return model;
}

void save_checkpoint(const ModelParams<float>& model, const std::filesystem::path& path) {
  binio::write_file(path, encode_checkpoint(model));
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path, const ArchConfig* expected) {
  return decode_checkpoint(binio::read_file(path), expected, path.string());
}

// ---------------------------------------------------------------------------

Geometry plain_geometry(const ArchConfig& arch) {
  return arch.dataset == DatasetKind::mnist ? kMnistGeometry : kCifarGeometry;
}

namespace {

std::vector<std::uint8_t> input_bytes(const RawImage& plain, const ArchConfig& arch) {
  if (plain.geometry != plain_geometry(arch) || plain.pixels.size() != plain.geometry.numel()) {
    throw GeometryError("image geometry " + plain.geometry.str() + " does not match " +
                        maskenc::to_string(arch.dataset) + " (" + plain_geometry(arch).str() + ")");
  }
  return plain.geometry.channels == 1 && arch.input.channels == 3 ? replicate_gray(plain.pixels) : plain.pixels;
}

}  // namespace

Tensor masked_input(const RawImage& plain, const Mask& mask, const ArchConfig& arch) {
  auto bytes = input_bytes(plain, arch);
  if (mask.geometry != arch.input) {
    throw GeometryError("mask geometry " + mask.geometry.str() + " does not match model input " + arch.input.str());
  }
  apply_mask_inplace(bytes, mask);
  return normalize_bytes(bytes, arch.input);
}

Tensor training_target(const RawImage& plain, const Mask& mask, const ArchConfig& arch) {
  if (arch.target_mode == TargetMode::plain) {
    input_bytes(plain, arch);
    return normalize_bytes(plain.pixels, plain.geometry);
  }
  return masked_input(plain, mask, arch);
}

std::vector<std::uint8_t> recover_plain(const Tensor& output, const Mask& mask, const ArchConfig& arch) {
  detail::expect_geometry(output.shape(), arch.output, "decoder output");
  if (output.shape().n != 1) throw GeometryError("recover_plain expects one image, got " + output.shape().str());
  auto bytes = to_bytes(output);
  if (arch.target_mode == TargetMode::plain) return bytes;
  apply_mask_inplace(bytes, mask);
  const Geometry plain = plain_geometry(arch);
  if (plain.channels == arch.output.channels) return bytes;
  // Gray dataset: fold the unmasked planes back into one.
  const std::size_t plane = plain.numel();
  const std::size_t planes = static_cast<std::size_t>(arch.output.channels);
  std::vector<std::uint8_t> gray(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    unsigned sum = 0;
    for (std::size_t c = 0; c < planes; ++c) sum += bytes[c * plane + i];
    gray[i] = static_cast<std::uint8_t>((sum + planes / 2) / planes);
  }
  return gray;
}

LatentCode encrypt_image(const RawImage& plain, const Mask& mask, const ModelParams<float>& model) {
  const Tensor latent = encode(masked_input(plain, mask, model.arch), model);
  return quantize_latent(latent, model.fingerprint());
}

RawImage decrypt_latent(const LatentCode& code, const Mask& mask, const ModelParams<float>& model) {
  if (code.fingerprint != static_cast<std::uint32_t>(model.fingerprint())) {
    throw GeometryError("latent was produced by a different model (fingerprint mismatch)");
  }
  if (code.geometry != model.arch.latent) {
    throw GeometryError("latent geometry " + code.geometry.str() + " does not match model latent " + model.arch.latent.str());
  }
  const Tensor out = decode(dequantize_latent(code), model);
  RawImage img;
  img.geometry = plain_geometry(model.arch);
  img.pixels = recover_plain(out, mask, model.arch);
  return img;
}

}  // namespace maskenc
