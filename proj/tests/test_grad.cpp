#include <gtest/gtest.h>

#include <random>

#include "maskenc/model.hpp"
#include "maskenc/ops.hpp"
#include "oracles.hpp"

using namespace maskenc;

namespace {

using Op = std::function<TensorD(const std::vector<TensorD>&, Tape<double>*)>;

// loss = mse(op(inputs), target); every input is checked.
double max_op_error(const Op& op, std::vector<TensorD> inputs, std::uint64_t seed, double h = 1e-6) {
  std::mt19937_64 rng(seed);
  const Shape out_shape = op(inputs, nullptr).shape();
  const TensorD target = oracle::random_tensor<double>(out_shape, rng);
  for (auto& t : inputs) t.set_requires_grad(true);
  Tape<double> tape;
  tape.backward(mse(op(inputs, &tape), target, &tape));
  double worst = 0;
  for (auto& t : inputs) {
    auto r = oracle::check_gradient(t, [&] { return mse(op(inputs, nullptr), target).item(); }, h);
    worst = std::max(worst, r.max_error);
  }
  return worst;
}

}  // namespace

TEST(FiniteDifference, Conv2d) {
  std::mt19937_64 rng(11);
  const Op op = [](const std::vector<TensorD>& in, Tape<double>* t) { return conv2d(in[0], in[1], in[2], 1, 1, t); };
  EXPECT_LT(max_op_error(op,
                         {oracle::random_tensor<double>({2, 3, 5, 4}, rng), oracle::random_tensor<double>({4, 3, 3, 3}, rng),
                          oracle::random_tensor<double>({1, 4, 1, 1}, rng)},
                         12),
            1e-4);
  const Op strided = [](const std::vector<TensorD>& in, Tape<double>* t) {
    return conv2d(in[0], in[1], in[2], 0, 2, t);
  };
  EXPECT_LT(max_op_error(strided,
                         {oracle::random_tensor<double>({1, 2, 7, 7}, rng), oracle::random_tensor<double>({3, 2, 3, 3}, rng),
                          oracle::random_tensor<double>({1, 3, 1, 1}, rng)},
                         13),
            1e-4);
}

TEST(FiniteDifference, ReluAwayFromZero) {
  std::mt19937_64 rng(14);
  TensorD x = oracle::random_tensor<double>({1, 2, 4, 4}, rng);
  for (auto& v : x.data()) v += v >= 0 ? 0.05 : -0.05;
  const Op op = [](const std::vector<TensorD>& in, Tape<double>* t) { return relu(in[0], t); };
  EXPECT_LT(max_op_error(op, {x}, 15), 1e-4);
}

TEST(FiniteDifference, Sigmoid) {
  std::mt19937_64 rng(16);
  const Op op = [](const std::vector<TensorD>& in, Tape<double>* t) { return sigmoid(in[0], t); };
  EXPECT_LT(max_op_error(op, {oracle::random_tensor<double>({1, 2, 3, 3}, rng, -4, 4)}, 17), 1e-4);
}

TEST(FiniteDifference, MaxpoolAndUpsample) {
  std::mt19937_64 rng(18);
  const Op pool = [](const std::vector<TensorD>& in, Tape<double>* t) { return maxpool2x2(in[0], t); };
  EXPECT_LT(max_op_error(pool, {oracle::random_tensor<double>({2, 2, 4, 6}, rng)}, 19), 1e-4);
  const Op up = [](const std::vector<TensorD>& in, Tape<double>* t) { return upsample2x(in[0], t); };
  EXPECT_LT(max_op_error(up, {oracle::random_tensor<double>({2, 2, 3, 2}, rng)}, 20), 1e-4);
}

TEST(FiniteDifference, PixelAffineWithGain) {
  std::mt19937_64 rng(21);
  const Op op = [](const std::vector<TensorD>& in, Tape<double>* t) { return pixel_affine(in[0], in[1], in[2], 8.0, t); };
  EXPECT_LT(max_op_error(op,
                         {oracle::random_tensor<double>({3, 2, 2, 3}, rng), oracle::random_tensor<double>({1, 2, 2, 3}, rng),
                          oracle::random_tensor<double>({1, 2, 2, 3}, rng)},
                         22),
            1e-4);
}

TEST(FiniteDifference, MseBothArguments) {
  std::mt19937_64 rng(23);
  TensorD a = oracle::random_tensor<double>({1, 1, 3, 3}, rng);
  TensorD b = oracle::random_tensor<double>({1, 1, 3, 3}, rng);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tape<double> tape;
  tape.backward(mse(a, b, &tape));
  auto ra = oracle::check_gradient(a, [&] { return mse(a, b).item(); }, 1e-6);
  auto rb = oracle::check_gradient(b, [&] { return mse(a, b).item(); }, 1e-6);
  EXPECT_LT(std::max(ra.max_error, rb.max_error), 1e-6);
}

class ModelGradient : public ::testing::TestWithParam<std::tuple<DatasetKind, TargetMode, ArchVariant>> {};

TEST_P(ModelGradient, EveryParameterOnAnEightPixelProbe) {
  const auto [kind, mode, variant] = GetParam();
  const ArchConfig arch = probe_arch(default_arch(kind, mode, variant), Geometry{8, 8, 3});
  const auto c = oracle::check_model(arch, 1e-3);
  EXPECT_EQ(static_cast<std::int64_t>(c.checked), c.parameters);
  EXPECT_EQ(c.unresolved, 0u);
  EXPECT_LT(c.worst, 1e-3) << "worst parameter " << c.worst_name;
}

// The gain-8 affine head in front of the output sigmoid makes the third
// derivative large, so the full-size check uses a finer step.
TEST(ModelGradientFullSize, MnistMaskedEveryParameter) {
  const auto c = oracle::check_model(default_arch(DatasetKind::mnist, TargetMode::masked), 1e-5);
  EXPECT_EQ(static_cast<std::int64_t>(c.checked), c.parameters);
  EXPECT_LT(c.worst, 1e-3) << "worst parameter " << c.worst_name;
}

INSTANTIATE_TEST_SUITE_P(
    Architectures, ModelGradient,
    ::testing::Values(std::tuple{DatasetKind::cifar10, TargetMode::masked, ArchVariant::positional},
                      std::tuple{DatasetKind::mnist, TargetMode::masked, ArchVariant::positional},
                      std::tuple{DatasetKind::cifar10, TargetMode::plain, ArchVariant::positional},
                      std::tuple{DatasetKind::cifar10, TargetMode::plain, ArchVariant::conv_only},
                      std::tuple{DatasetKind::mnist, TargetMode::plain, ArchVariant::conv_only}),
    [](const auto& info) {
      return to_string(std::get<0>(info.param)) + "_" + to_string(std::get<1>(info.param)) + "_" +
             (std::get<2>(info.param) == ArchVariant::positional ? "positional" : "convonly");
    });
