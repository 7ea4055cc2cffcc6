#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "rrm/error.hpp"
#include "rrm/gradcheck.hpp"
#include "rrm/ops.hpp"
#include "rrm/rng.hpp"
#include "rrm/scan_order.hpp"
#include "rrm/tensor.hpp"

using namespace rrm;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad(grad);
  return t;
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
}

TEST(Tensor, NonFiniteResultIsAnError) {
  Tensor big({1}, {1000.0});
  EXPECT_THROW(rrm::exp(big), NumericError);
}

TEST(Conv2d, OnesKernelCountsOverlap) {
  Tensor x({1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor w({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  Tensor b({1}, {0.0});
  Tensor y = conv2d(x, w, b, 1, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 3}));
  EXPECT_DOUBLE_EQ(y[4], 9.0);
  EXPECT_DOUBLE_EQ(y[0], 4.0);
  EXPECT_DOUBLE_EQ(y[1], 6.0);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(1);
  Tensor x = random_tensor({1, 4, 5}, rng);
  Tensor y = conv2d(x, Tensor({1, 1, 1, 1}, {1.0}), Tensor({1}, {0.0}), 1, 0);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Conv2d, MatchesLoopOracle) {
  Rng rng(2);
  for (std::size_t k : {1, 3, 5}) {
    for (std::size_t stride : {1, 2}) {
      Tensor x = random_tensor({3, 7, 6}, rng);
      Tensor w = random_tensor({2, 3, k, k}, rng);
      Tensor b = random_tensor({2}, rng);
      Tensor y = conv2d(x, w, b, stride, (k - 1) / 2);
      std::size_t oh = 0, ow = 0;
      const auto ref = oracle::conv2d({x.data().begin(), x.data().end()}, 3, 7, 6, {w.data().begin(), w.data().end()},
                                      {b.data().begin(), b.data().end()}, 2, k, stride, (k - 1) / 2, oh, ow);
      ASSERT_EQ(y.shape(), (Shape{2, oh, ow}));
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, ErrorsOnBadShapes) {
  Tensor x({2, 4, 4}, std::vector<double>(32, 0.0));
  EXPECT_THROW(conv2d(x, Tensor({1, 3, 3, 3}, std::vector<double>(27)), Tensor({1}, {0.0}), 1, 1), DimensionError);
  EXPECT_THROW(conv2d(x, Tensor({1, 2, 2, 2}, std::vector<double>(8)), Tensor({1}, {0.0}), 1, 0), ConfigError);
}

TEST(Conv2d, WeightGradientMatchesFiniteDifferences) {
  Rng rng(3);
  Tensor x = random_tensor({2, 4, 4}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng, true);
  Tensor b = random_tensor({3}, rng, true);
  GradcheckOptions opts;
  opts.step = 1e-4;
  const auto r = check_gradients("conv2d", [&] { return sum(conv2d(x, w, b, 1, 1)); }, {w, b}, rng, opts);
  EXPECT_LE(r.max_rel_err, 1e-3);
  EXPECT_GT(r.checked, 0u);
}

TEST(Primitives, SiluAtZero) {
  Tensor x({1}, {0.0});
  x.set_requires_grad(true);
  Tensor y = silu(x);
  EXPECT_EQ(y.item(), 0.0);
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.5);
}

TEST(Primitives, LayerNormOfConstantIsZero) {
  Tensor x({4, 1, 1}, {2.0, 2.0, 2.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = layer_norm(x);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
  backward(sum(mul(y, y)));
  for (double g : x.grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(Primitives, LayerNormMomentsPerLocation) {
  Rng rng(4);
  std::vector<double> v(6 * 15);
  for (double& e : v) e = rng.uniform(-5.0, 5.0);
  Tensor y = layer_norm(Tensor({6, 3, 5}, v));
  for (std::size_t p = 0; p < 15; ++p) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 6; ++c) m += y[c * 15 + p];
    m /= 6.0;
    for (std::size_t c = 0; c < 6; ++c) v += (y[c * 15 + p] - m) * (y[c * 15 + p] - m);
    v /= 6.0;
    EXPECT_LE(std::fabs(m), 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-4);
  }
}

TEST(Primitives, GatherScatterIdentityForEveryOrder) {
  Rng rng(5);
  for (std::size_t h = 1; h <= 5; ++h)
    for (std::size_t w = 1; w <= 5; ++w) {
      Tensor x = random_tensor({3, h * w}, rng);
      for (const ScanOrder& o : all_eight(h, w)) {
        Tensor y = scatter_inverse(gather_permute(x, o.order), o.order);
        for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(x[i], y[i]);
      }
    }
}

TEST(Primitives, PixelShuffleLayout) {
  std::vector<double> v(4 * 1 * 1);
  std::iota(v.begin(), v.end(), 0.0);
  Tensor y = pixel_shuffle(Tensor({4, 1, 1}, v), 2);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(std::vector<double>(y.data().begin(), y.data().end()), (std::vector<double>{0, 1, 2, 3}));
}

TEST(Autodiff, SquareGradient) {
  Tensor x({1}, {3.0});
  x.set_requires_grad(true);
  backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, BilinearGradient) {
  Rng rng(6);
  Tensor a = random_tensor({2, 3}, rng, true);
  Tensor b = random_tensor({2, 3}, rng);
  backward(sum(mul(a, b)));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.grad()[i], b[i]);
}

TEST(Autodiff, FanOutAccumulates) {
  Tensor x({1}, {2.0});
  x.set_requires_grad(true);
  backward(add(mul(x, x), scale(x, 3.0)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Autodiff, NonScalarRootIsContractError) {
  Tensor x({2}, {1.0, 2.0});
  x.set_requires_grad(true);
  Tensor y = scale(x, 2.0);
  EXPECT_THROW(backward(y), ContractError);
  active_tape().clear();
}

TEST(Autodiff, TapeIsTopological) {
  Rng rng(7);
  Tensor x = random_tensor({2, 3, 3}, rng, true);
  Tensor y = sum(gelu(layer_norm(add(x, x))));
  std::vector<std::uint64_t> seen{x.id()};
  for (const auto& e : active_tape().entries()) {
    for (const auto& in : e.inputs) {
      if (!in->requires_grad || in->id == x.id()) continue;
      EXPECT_NE(std::find(seen.begin(), seen.end(), in->id), seen.end());
    }
    seen.push_back(e.output->id);
  }
  backward(y);
  EXPECT_EQ(active_tape().size(), 0u);
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
  Tensor x({1}, {1.0});
  x.set_requires_grad(true);
  {
    NoGradGuard guard;
    Tensor y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_EQ(active_tape().size(), 0u);
}

TEST(Autodiff, DeterministicGradients) {
  auto run = [] {
    Rng rng(8);
    Tensor x = random_tensor({2, 4, 4}, rng, true);
    Tensor w = random_tensor({2, 2, 3, 3}, rng, true);
    Tensor b = random_tensor({2}, rng, true);
    backward(sum(silu(conv2d(x, w, b, 1, 1))));
    return std::make_pair(x.grad(), w.grad());
  };
  EXPECT_EQ(run(), run());
}

TEST(Gradcheck, EveryPrimitiveAndBlock) {
  for (const auto& r : run_gradcheck_suite(0)) {
    EXPECT_LE(r.max_rel_err, 1e-3) << r.name;
    EXPECT_GT(r.checked, 0u) << r.name;
  }
}
