#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rrm/config.hpp"
#include "rrm/error.hpp"
#include "rrm/network.hpp"
#include "rrm/ops.hpp"
#include "rrm/train.hpp"

using namespace rrm;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(0.0, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

NetworkConfig small() {
  NetworkConfig c;
  c.base_width = 4;
  c.depth = 2;
  c.state_dim = 2;
  return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Network, BayerShapeContract) {
  NetworkConfig cfg;  // depth 3, width 8
  RetinexRawMamba net(cfg, 0);
  NoGradGuard g;
  const auto out = net.forward(random_tensor({4, 16, 16}, 1));
  EXPECT_EQ(out.raw.shape(), (Shape{4, 16, 16}));
  EXPECT_EQ(out.srgb.shape(), (Shape{3, 32, 32}));
}

TEST(Network, XTransShapeContract) {
  NetworkConfig cfg;
  cfg.cfa = Cfa::XTrans;
  RetinexRawMamba net(cfg, 0);
  NoGradGuard g;
  const auto out = net.forward(random_tensor({9, 12, 12}, 2));
  EXPECT_EQ(out.raw.shape(), (Shape{9, 12, 12}));
  EXPECT_EQ(out.srgb.shape(), (Shape{3, 36, 36}));
}

TEST(Network, InputErrors) {
  RetinexRawMamba net(NetworkConfig{}, 0);
  NoGradGuard g;
  EXPECT_THROW(net.forward(random_tensor({4, 6, 8}, 3)), ConfigError);
  EXPECT_THROW(net.forward(random_tensor({9, 8, 8}, 3)), DimensionError);
}

TEST(Network, ConfigValidation) {
  NetworkConfig c;
  c.depth = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.ca_reduction = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.scan_directions = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(RetinexRawMamba(c, 0), ConfigError);
}

TEST(Network, WidthsDoublePerLevel) {
  NetworkConfig c;
  c.depth = 4;
  for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(c.width(l), 8u << l);
  EXPECT_EQ(c.spatial_multiple(), 8u);
}

TEST(Network, ForwardIsDeterministic) {
  const Tensor x = random_tensor({4, 8, 8}, 4);
  NoGradGuard g;
  const auto a = RetinexRawMamba(small(), 7).forward(x);
  const auto b = RetinexRawMamba(small(), 7).forward(x);
  EXPECT_EQ(max_abs_diff(a.raw, b.raw), 0.0);
  EXPECT_EQ(max_abs_diff(a.srgb, b.srgb), 0.0);
}

TEST(Network, EnhanceBranchChangesOutputs) {
  const Tensor x = random_tensor({4, 8, 8}, 5);
  NetworkConfig off = small();
  off.enhance_branch = false;
  NoGradGuard g;
  const auto a = RetinexRawMamba(small(), 3).forward(x);
  const auto b = RetinexRawMamba(off, 3).forward(x);
  EXPECT_GT(max_abs_diff(a.raw, b.raw), 0.0);
  EXPECT_GT(max_abs_diff(a.srgb, b.srgb), 0.0);
}

TEST(Network, EveryParameterReceivesGradient) {
  // Width 8 so every channel attention has a mirrored pair of hidden units;
  // with a single hidden unit the ReLU may be inactive for a given input.
  NetworkConfig base = small();
  base.base_width = 8;
  for (NetworkConfig cfg : {base, [&] {
                              NetworkConfig c = base;
                              c.enhance_stage = EnhanceStage::Decoding;
                              c.fusion = FusionKind::Concat1x1;
                              return c;
                            }()}) {
    RetinexRawMamba net(cfg, 11);
    const Tensor x = random_tensor({4, 8, 8}, 6);
    const auto out = net.forward(x);
    backward(total_loss(out.raw, out.srgb, random_tensor({4, 8, 8}, 7), random_tensor({3, 16, 16}, 8), LossConfig{}));
    for (const NamedParam& p : net.parameters()) {
      bool nonzero = false;
      for (double v : p.tensor.grad()) nonzero = nonzero || v != 0.0;
      EXPECT_TRUE(nonzero) << p.name;
    }
  }
}

TEST(Network, ParameterNamesAreUnique) {
  const auto params = RetinexRawMamba(NetworkConfig{}, 0).parameters();
  std::set<std::string> names;
  for (const auto& p : params) EXPECT_TRUE(names.insert(p.name).second) << p.name;
}

TEST(ParamCount, SingleConv) {
  Rng rng(0);
  Conv2d conv(1, 1, 3, rng);
  ParamList p;
  conv.collect(p, "conv");
  EXPECT_EQ(param_count(p), 10u);
}

TEST(ParamCount, DoublingWidthQuadruplesConvParams) {
  NetworkConfig a;
  a.base_width = 32;
  a.depth = 4;
  NetworkConfig b = a;
  b.base_width = 64;
  const double ratio = double(count_params(b).conv) / double(count_params(a).conv);
  EXPECT_NEAR(ratio, 4.0, 0.2);
  EXPECT_EQ(count_params(a).total, param_count(RetinexRawMamba(a, 0).parameters()));
}

TEST(FlopCount, GrowsWithDirectionsAndSize) {
  NetworkConfig one = small();
  one.scan_directions = 1;
  NetworkConfig eight = small();
  EXPECT_GT(count_flops(eight, 8, 8), count_flops(one, 8, 8));
  EXPECT_GT(count_flops(eight, 16, 16), count_flops(eight, 8, 8));
  EXPECT_EQ(count_flops(eight, 8, 8), count_flops(eight, 8, 8));
}

TEST(NetworkConfigJson, RoundTripAndUnknownFields) {
  NetworkConfig c = small();
  c.fusion = FusionKind::Concat1x1;
  c.enhance_stage = EnhanceStage::Decoding;
  nlohmann::json j = c;
  EXPECT_EQ(j.get<NetworkConfig>(), c);
  j["bogus"] = 1;
  EXPECT_THROW(j.get<NetworkConfig>(), ConfigError);
}
