#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stnet/network.hpp"

namespace stnet {
namespace {

using testing::random_volume;

float rel_diff(float a, float b) {
  return std::fabs(a - b) / std::max(1.0f, std::fabs(b));
}

LayerSpec random_conv(std::mt19937& rng, std::size_t in, std::size_t k, std::size_t s,
                      std::size_t p, std::size_t out) {
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor w({out, in, k, k});
  for (float& x : w.data) x = u(rng);
  std::vector<float> b(out);
  for (float& x : b) x = u(rng);
  return LayerSpec::conv("conv", k, s, p, std::move(w), std::move(b));
}

TEST(ConvForward, MatchesNaiveOracle) {
  std::mt19937 rng(21);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t k = pick(1, 5), s = pick(1, 3), p = pick(0, k - 1);
    const std::size_t h = pick(k, 12), w = pick(k, 12), c = pick(1, 4);
    const LayerSpec layer = random_conv(rng, c, k, s, p, pick(1, 4));
    const FeatureVolume in = random_volume(rng, {h, w, c}, -2.0f, 2.0f);
    const FeatureVolume got = conv_forward(in, layer);
    const FeatureVolume want = testing::naive_conv(in, layer);
    ASSERT_EQ(got.shape(), want.shape());
    for (std::size_t i = 0; i < got.size(); ++i) ASSERT_LE(rel_diff(got[i], want[i]), 1e-6f);
  }
}

TEST(ConvForward, FiveByFiveExample) {
  std::mt19937 rng(5);
  const LayerSpec layer = random_conv(rng, 2, 3, 1, 0, 1);
  const FeatureVolume in = random_volume(rng, {5, 5, 2}, 0.0f, 1.0f);
  const FeatureVolume got = conv_forward(in, layer);
  EXPECT_EQ(got.shape(), (Shape3{3, 3, 1}));
  const FeatureVolume want = testing::naive_conv(in, layer);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LE(rel_diff(got[i], want[i]), 1e-6f);
}

TEST(FcForward, MatchesNaiveOracle) {
  std::mt19937 rng(22);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t in = 1 + rng() % 60, out = 1 + rng() % 8;
    Tensor w({out, in});
    for (float& x : w.data) x = u(rng);
    std::vector<float> b(out);
    for (float& x : b) x = u(rng);
    const LayerSpec layer = LayerSpec::fc("fc", std::move(w), std::move(b));
    const FeatureVolume x = random_volume(rng, {1, 1, in}, -3.0f, 3.0f);
    const FeatureVolume got = fc_forward(x, layer);
    const FeatureVolume want = testing::naive_fc(x, layer);
    for (std::size_t i = 0; i < out; ++i) ASSERT_LE(rel_diff(got[i], want[i]), 1e-6f);
  }
}

TEST(Relu, ExampleAndIdempotence) {
  const FeatureVolume in({1, 1, 3}, {-1.0f, 0.0f, 2.0f});
  const FeatureVolume out = relu_forward(in);
  EXPECT_EQ(out, FeatureVolume({1, 1, 3}, {0.0f, 0.0f, 2.0f}));
  EXPECT_EQ(relu_forward(out), out);
}

TEST(Maxpool, PicksMaximum) {
  const FeatureVolume in({2, 2, 1}, {1, 2, 3, 4});
  const FeatureVolume out = maxpool_forward(in, LayerSpec::maxpool("p", 2, 2));
  EXPECT_EQ(out, FeatureVolume({1, 1, 1}, {4.0f}));
}

TEST(Avgpool, CountsPaddingInDivisor) {
  const FeatureVolume in({2, 2, 1}, {4, 4, 4, 4});
  const FeatureVolume out = avgpool_forward(in, LayerSpec::avgpool("p", 2, 2, 1));
  ASSERT_EQ(out.shape(), (Shape3{2, 2, 1}));
  EXPECT_FLOAT_EQ(out[0], 1.0f);
}

TEST(Softmax, UniformAndNormalized) {
  const FeatureVolume out = softmax_forward(FeatureVolume({1, 1, 2}, {0.0f, 0.0f}));
  EXPECT_FLOAT_EQ(out[0], 0.5f);
  EXPECT_FLOAT_EQ(out[1], 0.5f);
  std::mt19937 rng(1);
  const FeatureVolume big = softmax_forward(random_volume(rng, {1, 1, 9}, -50.0f, 80.0f));
  EXPECT_NEAR(sum(big), 1.0, 1e-6);
}

TEST(Flatten, KeepsStorageOrder) {
  const FeatureVolume in({1, 2, 2}, {1, 2, 3, 4});
  const FeatureVolume out = flatten_forward(in);
  EXPECT_EQ(out.shape(), (Shape3{1, 1, 4}));
  EXPECT_EQ(out[2], 3.0f);
}

TEST(NetworkValidation, RejectsBadStacks) {
  const LayerSpec fc = LayerSpec::fc("fc", Tensor({2, 4}), {0, 0});
  EXPECT_THROW(Network({2, 2, 1}, {fc}), Error);
  EXPECT_THROW(Network({2, 2, 1}, {LayerSpec::flatten("a"), LayerSpec::flatten("b")}), Error);
  EXPECT_THROW(Network({2, 2, 1}, {LayerSpec::flatten("f"), LayerSpec::maxpool("p", 1, 1)}),
               Error);
  EXPECT_THROW(Network({2, 2, 1}, {LayerSpec::relu("r"), LayerSpec::relu("r")}), ConfigError);
  EXPECT_THROW(Network({2, 2, 1}, {LayerSpec::relu("input")}), ConfigError);
  EXPECT_THROW(Network({2, 2, 1}, {LayerSpec::maxpool("p", 3, 1)}), ShapeError);
}

TEST(NetworkValidation, TraceIndices) {
  const Network net({4, 4, 1}, {LayerSpec::relu("r"), LayerSpec::maxpool("p", 2, 2),
                                LayerSpec::flatten("f")});
  EXPECT_EQ(net.trace_index_of("input"), 0u);
  EXPECT_EQ(net.trace_index_of("p"), 2u);
  EXPECT_THROW(net.trace_index_of("nope"), ConfigError);
  EXPECT_EQ(net.bridge_index(), std::optional<std::size_t>(2));
  EXPECT_EQ(net.geometry_at(2), (RFGeometry{2, 2, 0.5}));
  EXPECT_THROW(net.geometry_at(3), ShapeError);
  EXPECT_EQ(net.class_count(), 4u);
}

TEST(NetworkForward, IdentityNetwork) {
  const Network net({2, 2, 1}, {LayerSpec::relu("r")});
  const FeatureVolume img({2, 2, 1}, {0.1f, 0.2f, 0.3f, 0.4f});
  const ActivationTrace trace = network_forward(net, img);
  ASSERT_EQ(trace.volumes.size(), 2u);
  EXPECT_EQ(trace.input(), img);
  EXPECT_EQ(trace.output(), img);
}

TEST(NetworkForward, PreprocessApplied) {
  Network net({1, 1, 2}, {LayerSpec::relu("r")});
  net.preprocess.mean = {0.5f, 0.25f};
  net.preprocess.scale = 2.0f;
  const ActivationTrace trace = network_forward(net, FeatureVolume({1, 1, 2}, {1.0f, 0.0f}));
  EXPECT_FLOAT_EQ(trace.input()[0], 1.0f);
  EXPECT_FLOAT_EQ(trace.input()[1], -0.5f);
  EXPECT_FLOAT_EQ(trace.output()[1], 0.0f);
  EXPECT_THROW(network_forward(net, FeatureVolume({2, 1, 2})), ShapeError);
}

TEST(NetworkForward, DeterministicAcrossThreadCounts) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Network net = testing::random_network(rng);
    const FeatureVolume img = random_volume(rng, net.input_shape(), 0.0f, 1.0f);
    const ActivationTrace one = network_forward(net, img, {1});
    const ActivationTrace four = network_forward(net, img, {4});
    EXPECT_EQ(one.volumes, four.volumes);
  }
}

}  // namespace
}  // namespace stnet
