#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "maskenc/dataio.hpp"
#include "maskenc/errors.hpp"
#include "maskenc/imageio.hpp"
#include "maskenc/masking.hpp"
#include "maskenc/model.hpp"
#include "maskenc/secmetrics.hpp"
#include "maskenc/synthetic.hpp"
#include "maskenc/trainer.hpp"

namespace maskenc::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultMaskSeed = "1";
constexpr std::uint64_t kDefaultInitSeed = 7;
constexpr std::uint64_t kDefaultShuffleSeed = 20240611;
constexpr std::uint64_t kDefaultSampleSeed = 99;
constexpr std::uint64_t kDefaultFixtureSeed = 2024;

struct MaskGenArgs {
  std::string seed = kDefaultMaskSeed;
  std::string label = "maskenc/mask";
  std::string geometry = "32x32x3";
  fs::path out;
};

struct TrainArgs {
  std::string dataset = "mnist";
  fs::path data_dir;
  fs::path mask;
  std::string arch = "positional";
  std::string target = "plain";
  int gray_planes = 3;
  int epochs = 5;
  std::size_t batch = 64;
  float lr = 0.001f;
  std::string optimizer = "adam";
  std::size_t subsample = 0;
  std::size_t test_count = 1000;
  std::uint64_t seed = kDefaultInitSeed;
  std::uint64_t shuffle_seed = kDefaultShuffleSeed;
  int checkpoint_every = 0;
  fs::path out_checkpoint;
  fs::path history_csv;
};

struct EncryptArgs {
  fs::path checkpoint;
  fs::path mask;
  fs::path in_image;
  fs::path out_latent;
};

struct DecryptArgs {
  fs::path checkpoint;
  fs::path mask;
  fs::path in_latent;
  fs::path out_image;
};

struct AnalyzeArgs {
  fs::path checkpoint;
  fs::path mask;
  std::string dataset = "cifar10";
  fs::path data_dir;
  fs::path report_dir;
  std::size_t count = 1000;
  std::size_t pairs = 4096;
  std::uint64_t seed = kDefaultSampleSeed;
  std::uint64_t throughput_images = 25;
  double rate = 100e6;
};

struct ExportArgs {
  std::string dataset = "mnist";
  fs::path data_dir;
  std::string split = "test";
  std::size_t index = 0;
  fs::path out;
};

struct FixtureArgs {
  std::string dataset = "mnist";
  fs::path out_dir;
  std::size_t train = 6000;
  std::size_t test = 1000;
  std::uint64_t seed = kDefaultFixtureSeed;
};

const auto kDatasetNames = CLI::IsMember({"mnist", "cifar10"});

// Output paths must point into an existing directory.
const CLI::Validator kWritablePath(
    [](std::string& value) -> std::string {
      const fs::path parent = fs::path(value).parent_path();
      if (!parent.empty() && !fs::is_directory(parent)) return "directory does not exist: " + parent.string();
      return {};
    },
    "WRITABLE");

bool wants_pnm(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

void save_image_any(const RawImage& image, const fs::path& path) {
  if (wants_pnm(path)) {
    pnm_save(image, path);
  } else {
    image_save(image, path);
  }
}

Mask load_mask_for(const ModelParams<float>& model, const fs::path& path) {
  Mask mask = mask_load(path);
  if (mask.geometry != model.arch.input) {
    throw GeometryError("mask " + path.string() + " is " + mask.geometry.str() + ", model input is " +
                        model.arch.input.str());
  }
  return mask;
}

int cmd_mask_gen(const MaskGenArgs& a, std::ostream& out) {
  const Geometry g = parse_geometry(a.geometry);
  MaskSeed seed = MaskSeed::parse(a.seed);
  seed.label = a.label;
  mask_save(mask_from_seed(seed, g), a.out);
  out << "mask " << g.str() << " written to " << a.out.string() << "\n";
  out << "key space: 2^" << key_space_bits(g) << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const DatasetKind kind = parse_dataset_kind(a.dataset);
  if (a.gray_planes != 1 && a.gray_planes != 3) throw std::invalid_argument("--gray-planes must be 1 or 3");
  if (kind == DatasetKind::cifar10 && a.gray_planes != 3) {
    throw std::invalid_argument("--gray-planes only applies to mnist");
  }
  const ArchConfig arch =
      default_arch(kind, parse_target_mode(a.target), parse_arch_variant(a.arch), a.gray_planes == 3);
  TrainConfig config;
  config.epochs = a.epochs;
  config.batch_size = a.batch;
  config.learning_rate = a.lr;
  config.optimizer = a.optimizer == "sgd" ? OptimizerKind::sgd : OptimizerKind::adam;
  config.init_seed = a.seed;
  config.shuffle_seed = a.shuffle_seed;
  if (a.subsample > 0) config.subsample = a.subsample;
  config.checkpoint_every = a.checkpoint_every;
  config.checkpoint_path = a.out_checkpoint;
  config.validate();

  const Mask mask = mask_load(a.mask);
  if (mask.geometry != arch.input) {
    throw GeometryError("mask " + a.mask.string() + " is " + mask.geometry.str() + ", " + a.dataset +
                        " model input is " + arch.input.str());
  }
  const DatasetSplit train_split = load_split(kind, a.data_dir, SplitRole::train);
  std::optional<DatasetSplit> test_split;
  if (a.test_count > 0) {
    DatasetSplit full = load_split(kind, a.data_dir, SplitRole::test);
    if (full.size() > a.test_count) full.images.resize(a.test_count);
    test_split = std::move(full);
  }
  out << "training " << to_string(kind) << " (" << to_string(arch.target_mode) << " target, "
      << to_string(arch.variant) << ") on " << (config.subsample ? std::min(*config.subsample, train_split.size())
                                                                 : train_split.size())
      << " images\n";
  const auto result = train(config, train_split, mask, arch, test_split ? &*test_split : nullptr,
                            [&out](const EpochRecord& e) {
                              out << "epoch " << e.epoch << " train_mse " << std::setprecision(6) << e.train_mse
                                  << " test_psnr_db " << e.test_psnr_db << " (" << e.seconds << " s)\n";
                            });
  if (!a.history_csv.empty()) result.history.write_csv(a.history_csv);
  out << "checkpoint written to " << a.out_checkpoint.string() << "\n";
  return kOk;
}

int cmd_encrypt(const EncryptArgs& a, std::ostream& out) {
  const ModelParams<float> model = load_checkpoint(a.checkpoint);
  const Mask mask = load_mask_for(model, a.mask);
  const RawImage image = image_load(a.in_image);
  const LatentCode code = encrypt_image(image, mask, model);
  latent_save(code, a.out_latent);
  out << "latent " << code.geometry.str() << " (" << code.bytes.size() << " bytes) written to "
      << a.out_latent.string() << "\n";
  return kOk;
}

int cmd_decrypt(const DecryptArgs& a, std::ostream& out) {
  const ModelParams<float> model = load_checkpoint(a.checkpoint);
  const Mask mask = load_mask_for(model, a.mask);
  const LatentCode code = latent_load(a.in_latent);
  const RawImage image = decrypt_latent(code, mask, model);
  save_image_any(image, a.out_image);
  out << "image " << image.geometry.str() << " written to " << a.out_image.string() << "\n";
  return kOk;
}

struct CorrelationRow {
  std::string stream;
  Direction direction;
  double mean = 0;
  std::size_t images = 0;
  std::size_t degenerate = 0;
};

CorrelationRow mean_correlation(const std::string& stream, const std::vector<std::vector<std::uint8_t>>& images,
                                Geometry g, Direction d, std::size_t pairs, std::uint64_t seed) {
  CorrelationRow row{stream, d};
  double sum = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto r = adjacent_correlation(images[i], g, d, pairs, seed + i);
    if (!r) {
      ++row.degenerate;
      continue;
    }
    sum += *r;
    ++row.images;
  }
  row.mean = row.images > 0 ? sum / static_cast<double>(row.images) : std::numeric_limits<double>::quiet_NaN();
  return row;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const ModelParams<float> model = load_checkpoint(a.checkpoint);
  const Mask mask = load_mask_for(model, a.mask);
  const DatasetKind kind = parse_dataset_kind(a.dataset);
  if (kind != model.arch.dataset) {
    throw GeometryError("checkpoint was built for " + to_string(model.arch.dataset) + ", not " + a.dataset);
  }
  if (a.count == 0) throw std::invalid_argument("--count must be >= 1");
  DatasetSplit split = load_split(kind, a.data_dir, SplitRole::test);
  if (split.size() > a.count) split.images.resize(a.count);
  fs::create_directories(a.report_dir);

  const Geometry input = model.arch.input;
  std::vector<std::vector<std::uint8_t>> plain, masked, latent;
  std::vector<std::uint8_t> pooled_plain, pooled_masked, pooled_latent;
  for (const auto& im : split.images) {
    auto p = im.geometry.channels == 1 && input.channels == 3 ? replicate_gray(im.pixels) : im.pixels;
    auto m = apply_mask(p, mask);
    auto l = encrypt_image(im, mask, model).bytes;
    pooled_plain.insert(pooled_plain.end(), p.begin(), p.end());
    pooled_masked.insert(pooled_masked.end(), m.begin(), m.end());
    pooled_latent.insert(pooled_latent.end(), l.begin(), l.end());
    plain.push_back(std::move(p));
    masked.push_back(std::move(m));
    latent.push_back(std::move(l));
  }

  const auto plain_dist = distribution_report(pooled_plain);
  const auto masked_dist = distribution_report(pooled_masked);
  const auto latent_dist = distribution_report(pooled_latent);
  write_histogram_csv(plain_dist.counts, a.report_dir / "plain_histogram.csv");
  write_histogram_csv(masked_dist.counts, a.report_dir / "masked_histogram.csv");
  write_histogram_csv(latent_dist.counts, a.report_dir / "latent_histogram.csv");
  {
    std::ofstream csv(a.report_dir / "distribution.csv");
    csv << "stream,samples,entropy_bits,chi_square,chi_square_q999\n" << std::setprecision(9);
    for (const auto& [name, r] : {std::pair{"plain", &plain_dist}, {"masked", &masked_dist}, {"latent", &latent_dist}}) {
      csv << name << ',' << r->samples << ',' << r->entropy_bits << ',' << r->chi_square << ',' << kChiSquare255Q999
          << '\n';
    }
  }

  std::vector<CorrelationRow> rows;
  for (Direction d : {Direction::horizontal, Direction::vertical, Direction::diagonal}) {
    rows.push_back(mean_correlation("plain", plain, input, d, a.pairs, a.seed));
    rows.push_back(mean_correlation("masked", masked, input, d, a.pairs, a.seed));
    rows.push_back(mean_correlation("latent", latent, model.arch.latent, d, a.pairs, a.seed));
  }
  {
    std::ofstream csv(a.report_dir / "correlation.csv");
    csv << "stream,direction,mean_r,images,degenerate\n" << std::setprecision(9);
    for (const auto& r : rows) {
      csv << r.stream << ',' << to_string(r.direction) << ',' << r.mean << ',' << r.images << ',' << r.degenerate
          << '\n';
    }
  }

  const auto tp = throughput_report(a.throughput_images, input, model.arch.latent.numel(), a.rate);
  {
    std::ofstream csv(a.report_dir / "throughput.csv");
    csv << "images,plain_bytes,latent_bytes,rate_bps,plain_us,latent_us,speedup\n" << std::setprecision(12);
    csv << tp.images << ',' << tp.plain_bytes << ',' << tp.latent_bytes << ',' << tp.rate_bps << ','
        << tp.plain_seconds * 1e6 << ',' << tp.latent_seconds * 1e6 << ',' << tp.speedup << '\n';
  }

  std::ostringstream text;
  text << "dataset: " << to_string(kind) << " (" << split.size() << " test images)\n";
  text << "key space: 2^" << key_space_bits(mask.geometry) << "\n";
  text << format_distribution("plain", plain_dist) << format_distribution("masked", masked_dist)
       << format_distribution("latent", latent_dist);
  text << std::fixed << std::setprecision(4);
  text << "masked entropy: " << masked_dist.entropy_bits << "\n";
  text << "latent entropy: " << latent_dist.entropy_bits << "\n";
  text << "masked chi-square: " << masked_dist.chi_square << " (0.999 quantile " << kChiSquare255Q999
       << ", mean over random keys for these images " << key_averaged_chi_square(plain) << ")\n";
  for (const auto& r : rows) {
    text << "correlation " << r.stream << " " << to_string(r.direction) << ": ";
    if (r.images == 0) {
      text << "degenerate\n";
    } else {
      text << r.mean << " over " << r.images << " images";
      if (r.degenerate > 0) text << " (" << r.degenerate << " degenerate)";
      text << "\n";
    }
  }
  text.unsetf(std::ios::fixed);
  text << std::setprecision(6) << format_throughput(tp);
  {
    std::ofstream f(a.report_dir / "report.txt");
    f << text.str();
  }
  out << text.str();
  return kOk;
}

int cmd_export(const ExportArgs& a, std::ostream& out) {
  const DatasetKind kind = parse_dataset_kind(a.dataset);
  const DatasetSplit split = load_split(kind, a.data_dir, a.split == "train" ? SplitRole::train : SplitRole::test);
  if (a.index >= split.size()) {
    throw std::invalid_argument("--index " + std::to_string(a.index) + " out of range (split has " +
                                std::to_string(split.size()) + " images)");
  }
  save_image_any(split.images[a.index], a.out);
  out << "image " << a.index << " (label " << int(split.images[a.index].label) << ") written to " << a.out.string()
      << "\n";
  return kOk;
}

int cmd_fixtures(const FixtureArgs& a, std::ostream& out) {
  const DatasetKind kind = parse_dataset_kind(a.dataset);
  if (a.train == 0 || a.test == 0) throw std::invalid_argument("--train and --test must be >= 1");
  write_synthetic_dataset(kind, a.out_dir, {a.train, a.test}, a.seed);
  out << "synthetic " << to_string(kind) << " corpus (" << a.train << " train, " << a.test << " test) written to "
      << a.out_dir.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Masked-autoencoder image encryption and compression", "maskenc"};
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.require_subcommand(1);

  MaskGenArgs mg;
  auto* mask_gen = app.add_subcommand("mask-gen", "derive an XOR mask from a seed");
  mask_gen->add_option("--seed", mg.seed, "64 hex digits or a decimal integer")->capture_default_str();
  mask_gen->add_option("--label", mg.label, "domain-separation label")->capture_default_str();
  mask_gen->add_option("--geometry", mg.geometry, "HxWxC")->capture_default_str();
  mask_gen->add_option("--out", mg.out)->required()->check(kWritablePath);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train an encoder/decoder pair");
  train_cmd->add_option("--dataset", tr.dataset)->check(kDatasetNames)->capture_default_str();
  train_cmd->add_option("--data-dir", tr.data_dir)->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--mask", tr.mask)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--arch", tr.arch)->check(CLI::IsMember({"positional", "default", "conv-only"}))
      ->capture_default_str();
  train_cmd->add_option("--target", tr.target, "decoder target: plain or masked")
      ->check(CLI::IsMember({"plain", "masked"}))
      ->capture_default_str();
  train_cmd->add_option("--gray-planes", tr.gray_planes, "mnist input planes (1 or 3)")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--batch", tr.batch)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr)->capture_default_str();
  train_cmd->add_option("--optimizer", tr.optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  train_cmd->add_option("--subsample", tr.subsample, "train on a seeded subset (0 = all)")->capture_default_str();
  train_cmd->add_option("--test-count", tr.test_count, "test images scored per epoch (0 = none)")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.seed, "weight initialisation seed")->capture_default_str();
  train_cmd->add_option("--shuffle-seed", tr.shuffle_seed)->capture_default_str();
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "epochs between checkpoints")
      ->capture_default_str();
  train_cmd->add_option("--out-checkpoint", tr.out_checkpoint)->required()->check(kWritablePath);
  train_cmd->add_option("--history-csv", tr.history_csv)->check(kWritablePath);

  EncryptArgs en;
  auto* encrypt = app.add_subcommand("encrypt", "mask and encode one image into a latent file");
  encrypt->add_option("--checkpoint", en.checkpoint)->required()->check(CLI::ExistingFile);
  encrypt->add_option("--mask", en.mask)->required()->check(CLI::ExistingFile);
  encrypt->add_option("--in-image", en.in_image)->required()->check(CLI::ExistingFile);
  encrypt->add_option("--out-latent", en.out_latent)->required()->check(kWritablePath);

  DecryptArgs de;
  auto* decrypt = app.add_subcommand("decrypt", "decode a latent file back to an image");
  decrypt->add_option("--checkpoint", de.checkpoint)->required()->check(CLI::ExistingFile);
  decrypt->add_option("--mask", de.mask)->required()->check(CLI::ExistingFile);
  decrypt->add_option("--in-latent", de.in_latent)->required()->check(CLI::ExistingFile);
  decrypt->add_option("--out-image", de.out_image, "container, or .pgm/.ppm raster")
      ->required()
      ->check(kWritablePath);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "distribution, correlation and throughput reports");
  analyze->add_option("--checkpoint", an.checkpoint)->required()->check(CLI::ExistingFile);
  analyze->add_option("--mask", an.mask)->required()->check(CLI::ExistingFile);
  analyze->add_option("--dataset", an.dataset)->check(kDatasetNames)->capture_default_str();
  analyze->add_option("--data-dir", an.data_dir)->required()->check(CLI::ExistingDirectory);
  analyze->add_option("--report-dir", an.report_dir)->required()->check(kWritablePath);
  analyze->add_option("--count", an.count, "test images analysed")->capture_default_str();
  analyze->add_option("--pairs", an.pairs, "sampled pixel pairs per image")->capture_default_str();
  analyze->add_option("--seed", an.seed, "pair sampling seed")->capture_default_str();
  analyze->add_option("--throughput-images", an.throughput_images)->capture_default_str();
  analyze->add_option("--rate", an.rate, "link rate in bit/s")->capture_default_str();

  ExportArgs ex;
  auto* export_cmd = app.add_subcommand("export-image", "copy one dataset image into an image file");
  export_cmd->add_option("--dataset", ex.dataset)->check(kDatasetNames)->capture_default_str();
  export_cmd->add_option("--data-dir", ex.data_dir)->required()->check(CLI::ExistingDirectory);
  export_cmd->add_option("--split", ex.split)->check(CLI::IsMember({"train", "test"}))->capture_default_str();
  export_cmd->add_option("--index", ex.index)->capture_default_str();
  export_cmd->add_option("--out", ex.out, "container, or .pgm/.ppm raster")->required()->check(kWritablePath);

  FixtureArgs fx;
  auto* fixtures = app.add_subcommand("make-fixtures", "write a synthetic corpus in the dataset file formats");
  fixtures->add_option("--dataset", fx.dataset)->check(kDatasetNames)->capture_default_str();
  fixtures->add_option("--out-dir", fx.out_dir)->required();
  fixtures->add_option("--train", fx.train)->capture_default_str();
  fixtures->add_option("--test", fx.test)->capture_default_str();
  fixtures->add_option("--seed", fx.seed)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*mask_gen) return cmd_mask_gen(mg, out);
    if (*train_cmd) return cmd_train(tr, out);
    if (*encrypt) return cmd_encrypt(en, out);
    if (*decrypt) return cmd_decrypt(de, out);
    if (*analyze) return cmd_analyze(an, out);
    if (*export_cmd) return cmd_export(ex, out);
    if (*fixtures) return cmd_fixtures(fx, out);
  } catch (const GeometryError& e) {
    err << "geometry error: " << e.what() << "\n";
    return kGeometry;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kFormat;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kFormat;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace maskenc::cli
