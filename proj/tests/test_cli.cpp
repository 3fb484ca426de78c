#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "maskenc/binio.hpp"
#include "maskenc/imageio.hpp"
#include "maskenc/masking.hpp"
#include "maskenc/model.hpp"
#include "maskenc/synthetic.hpp"

using namespace maskenc;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "maskenc");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

// One small corpus, mask and trained checkpoint per dataset, shared by the suite.
class CliPipeline : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "maskenc_test_cli"; }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    for (const std::string ds : {"mnist", "cifar10"}) {
      const std::string dir = (root() / ds).string();
      ASSERT_EQ(run({"make-fixtures", "--dataset", ds, "--out-dir", dir, "--train", "64", "--test", "40"}).code, 0);
      const std::string geom = ds == "mnist" ? "28x28x3" : "32x32x3";
      ASSERT_EQ(run({"mask-gen", "--seed", "5", "--geometry", geom, "--out", dir + "/key.xmsk"}).code, 0);
      const CliRun t = run({"train", "--dataset", ds, "--data-dir", dir, "--mask", dir + "/key.xmsk", "--epochs", "1",
                         "--batch", "16", "--test-count", "8", "--out-checkpoint", dir + "/model.ckpt",
                         "--history-csv", dir + "/history.csv"});
      ASSERT_EQ(t.code, 0) << t.err;
      ASSERT_EQ(run({"export-image", "--dataset", ds, "--data-dir", dir, "--split", "test", "--index", "3", "--out",
                     dir + "/plain.ximg"})
                    .code,
                0);
    }
  }

  static void TearDownTestSuite() { fs::remove_all(root()); }

  static std::string path(const std::string& ds, const std::string& name) { return (root() / ds / name).string(); }
};

}  // namespace

TEST(Cli, HelpAndUsage) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"mask-gen"}).code, 2);  // --out is required
}

TEST(Cli, MaskGenPrintsKeySpaceAndIsDeterministic) {
  const fs::path dir = fs::temp_directory_path() / "maskenc_test_maskgen";
  fs::create_directories(dir);
  const CliRun a = run({"mask-gen", "--seed", "42", "--geometry", "32x32x3", "--out", (dir / "a.xmsk").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("key space: 2^24576"), std::string::npos) << a.out;
  ASSERT_EQ(run({"mask-gen", "--seed", "42", "--geometry", "32x32x3", "--out", (dir / "b.xmsk").string()}).code, 0);
  ASSERT_EQ(run({"mask-gen", "--seed", "43", "--geometry", "32x32x3", "--out", (dir / "c.xmsk").string()}).code, 0);
  EXPECT_EQ(binio::read_file(dir / "a.xmsk"), binio::read_file(dir / "b.xmsk"));
  EXPECT_NE(binio::read_file(dir / "a.xmsk"), binio::read_file(dir / "c.xmsk"));
  for (const std::string bad : {"32x32", "32xx3", "axbxc", "0x32x3", ""}) {
    EXPECT_EQ(run({"mask-gen", "--geometry", bad, "--out", (dir / "d.xmsk").string()}).code, 2) << bad;
  }
  EXPECT_EQ(run({"mask-gen", "--seed", "not-a-seed", "--out", (dir / "d.xmsk").string()}).code, 2);
  EXPECT_EQ(run({"mask-gen", "--out", (dir / "no/such/dir/d.xmsk").string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, ConfigFileSuppliesDefaultsAndFlagsOverride) {
  const fs::path dir = fs::temp_directory_path() / "maskenc_test_config";
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "run.toml");
    cfg << "[mask-gen]\nseed = \"42\"\ngeometry = \"28x28x3\"\n";
  }
  ASSERT_EQ(run({"--config", (dir / "run.toml").string(), "mask-gen", "--out", (dir / "a.xmsk").string()}).code, 0);
  EXPECT_EQ(mask_load(dir / "a.xmsk"), mask_from_seed(MaskSeed::parse("42"), Geometry{28, 28, 3}));
  ASSERT_EQ(run({"--config", (dir / "run.toml").string(), "mask-gen", "--seed", "7", "--out",
                 (dir / "b.xmsk").string()})
                .code,
            0);
  EXPECT_EQ(mask_load(dir / "b.xmsk"), mask_from_seed(MaskSeed::parse("7"), Geometry{28, 28, 3}));
  fs::remove_all(dir);
}

TEST_F(CliPipeline, TrainWritesHistoryAndRejectsZeroEpochs) {
  EXPECT_EQ(count_lines(path("mnist", "history.csv")), 2u);
  const auto model = load_checkpoint(path("mnist", "model.ckpt"));
  EXPECT_EQ(model.arch, default_arch(DatasetKind::mnist));
  const CliRun r = run({"train", "--dataset", "mnist", "--data-dir", (root() / "mnist").string(), "--mask",
                     path("mnist", "key.xmsk"), "--epochs", "0", "--out-checkpoint", path("mnist", "zero.ckpt")});
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("mnist", "zero.ckpt")));
  EXPECT_EQ(run({"train", "--dataset", "mnist", "--data-dir", (root() / "mnist").string(), "--mask",
                 path("cifar10", "key.xmsk"), "--epochs", "1", "--out-checkpoint", path("mnist", "x.ckpt")})
                .code,
            5);
  EXPECT_EQ(run({"train", "--dataset", "mnist", "--data-dir", (root() / "nowhere").string(), "--mask",
                 path("mnist", "key.xmsk"), "--out-checkpoint", path("mnist", "x.ckpt")})
                .code,
            2);
}

TEST_F(CliPipeline, EncryptWritesHeaderPlusBudget) {
  for (const auto& [ds, budget] : {std::pair{std::string("cifar10"), 1024u}, {std::string("mnist"), 784u}}) {
    const CliRun r = run({"encrypt", "--checkpoint", path(ds, "model.ckpt"), "--mask", path(ds, "key.xmsk"),
                       "--in-image", path(ds, "plain.ximg"), "--out-latent", path(ds, "c.xlat")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(fs::file_size(path(ds, "c.xlat")), 16u + budget);
    const CliRun again = run({"encrypt", "--checkpoint", path(ds, "model.ckpt"), "--mask", path(ds, "key.xmsk"),
                           "--in-image", path(ds, "plain.ximg"), "--out-latent", path(ds, "c2.xlat")});
    ASSERT_EQ(again.code, 0);
    EXPECT_EQ(binio::read_file(path(ds, "c.xlat")), binio::read_file(path(ds, "c2.xlat")));
  }
  const CliRun wrong = run({"encrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("mnist", "key.xmsk"),
                         "--in-image", path("cifar10", "plain.ximg"), "--out-latent", path("mnist", "w.xlat")});
  EXPECT_EQ(wrong.code, 5) << wrong.err;
  const CliRun key = run({"encrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("cifar10", "key.xmsk"),
                       "--in-image", path("mnist", "plain.ximg"), "--out-latent", path("mnist", "w.xlat")});
  EXPECT_EQ(key.code, 5) << key.err;
}

TEST_F(CliPipeline, DecryptProducesThePlainGeometry) {
  ASSERT_EQ(run({"encrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("mnist", "key.xmsk"),
                 "--in-image", path("mnist", "plain.ximg"), "--out-latent", path("mnist", "d.xlat")})
                .code,
            0);
  const CliRun r = run({"decrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("mnist", "key.xmsk"),
                     "--in-latent", path("mnist", "d.xlat"), "--out-image", path("mnist", "back.ximg")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(image_load(path("mnist", "back.ximg")).geometry, kMnistGeometry);
  ASSERT_EQ(run({"decrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("mnist", "key.xmsk"),
                 "--in-latent", path("mnist", "d.xlat"), "--out-image", path("mnist", "back.pgm")})
                .code,
            0);
  EXPECT_EQ(image_load(path("mnist", "back.pgm")).pixels, image_load(path("mnist", "back.ximg")).pixels);

  // A latent from the CIFAR model carries a different fingerprint.
  ASSERT_EQ(run({"encrypt", "--checkpoint", path("cifar10", "model.ckpt"), "--mask", path("cifar10", "key.xmsk"),
                 "--in-image", path("cifar10", "plain.ximg"), "--out-latent", path("cifar10", "d.xlat")})
                .code,
            0);
  const CliRun mismatch = run({"decrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("mnist", "key.xmsk"),
                            "--in-latent", path("cifar10", "d.xlat"), "--out-image", path("mnist", "x.ximg")});
  EXPECT_EQ(mismatch.code, 5);
  EXPECT_NE(mismatch.err.find("fingerprint"), std::string::npos) << mismatch.err;

  std::ofstream(path("mnist", "junk.xlat")) << "not a latent";
  EXPECT_EQ(run({"decrypt", "--checkpoint", path("mnist", "model.ckpt"), "--mask", path("mnist", "key.xmsk"),
                 "--in-latent", path("mnist", "junk.xlat"), "--out-image", path("mnist", "x.ximg")})
                .code,
            3);
}

TEST_F(CliPipeline, AnalyzeWritesReports) {
  const std::string report = (root() / "report").string();
  const CliRun r = run({"analyze", "--checkpoint", path("cifar10", "model.ckpt"), "--mask", path("cifar10", "key.xmsk"),
                     "--data-dir", (root() / "cifar10").string(), "--report-dir", report, "--count", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("speedup: 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("key space: 2^24576"), std::string::npos);
  EXPECT_NE(r.out.find("masked entropy: "), std::string::npos);
  EXPECT_NE(r.out.find("latent entropy: "), std::string::npos);
  for (const char* h : {"plain_histogram.csv", "masked_histogram.csv", "latent_histogram.csv"}) {
    EXPECT_EQ(count_lines(fs::path(report) / h), 257u) << h;  // header + 256 rows
  }
  for (const char* f : {"distribution.csv", "correlation.csv", "throughput.csv", "report.txt"}) {
    EXPECT_TRUE(fs::exists(fs::path(report) / f)) << f;
  }
  std::ifstream tp(fs::path(report) / "throughput.csv");
  std::string header, row;
  std::getline(tp, header);
  std::getline(tp, row);
  EXPECT_EQ(row, "25,3072,1024,100000000,6144,2048,3");

  // Idempotent: a second run writes identical files.
  const std::string again = (root() / "report2").string();
  ASSERT_EQ(run({"analyze", "--checkpoint", path("cifar10", "model.ckpt"), "--mask", path("cifar10", "key.xmsk"),
                 "--data-dir", (root() / "cifar10").string(), "--report-dir", again, "--count", "40"})
                .code,
            0);
  for (const char* f : {"masked_histogram.csv", "distribution.csv", "correlation.csv", "report.txt"}) {
    EXPECT_EQ(binio::read_file(fs::path(report) / f), binio::read_file(fs::path(again) / f)) << f;
  }
  EXPECT_EQ(run({"analyze", "--checkpoint", path("cifar10", "model.ckpt"), "--mask", path("cifar10", "key.xmsk"),
                 "--dataset", "mnist", "--data-dir", (root() / "mnist").string(), "--report-dir", again})
                .code,
            5);
}
