#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "rrm/error.hpp"
#include "rrm/gradcheck.hpp"
#include "rrm/ops.hpp"
#include "rrm/rng.hpp"
#include "rrm/ssm.hpp"

using namespace rrm;

TEST(Discretize, ClosedForms) {
  const auto d = ssm::discretize(1.0, 5.0, std::log(2.0));
  EXPECT_NEAR(d.a_bar, 2.0, 1e-12);
  EXPECT_NEAR(d.b_bar, 5.0, 1e-12);
  const auto e = ssm::discretize(-1.0, 1.0, 1.0);
  EXPECT_NEAR(e.a_bar, std::exp(-1.0), 1e-12);
  EXPECT_NEAR(e.b_bar, 1.0 - std::exp(-1.0), 1e-12);
}

TEST(Discretize, SmallAUsesTaylorLimit) {
  const auto d = ssm::discretize(0.0, 3.0, 0.5);
  EXPECT_EQ(d.a_bar, 1.0);
  EXPECT_NEAR(d.b_bar, 1.5, 1e-15);
  for (double a : {1e-6, -1e-6, 5e-5}) {
    const auto t = ssm::discretize(a, 1.0, 0.7);
    const double z = 0.7 * a;
    EXPECT_DOUBLE_EQ(t.b_bar, 0.7 * (1.0 + z / 2.0));
    EXPECT_NEAR(t.b_bar, 0.7 * std::expm1(z) / z, z * z);
  }
}

TEST(Discretize, NonPositiveStepIsContractError) {
  EXPECT_THROW(ssm::discretize(-1.0, 1.0, 0.0), ContractError);
  EXPECT_THROW(ssm::discretize(-1.0, 1.0, -0.1), ContractError);
}

TEST(Discretize, DecayIsInUnitInterval) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto d = ssm::discretize(-rng.uniform(1e-3, 5.0), 1.0, rng.uniform(1e-3, 1.0));
    EXPECT_GT(d.a_bar, 0.0);
    EXPECT_LT(d.a_bar, 1.0);
  }
}

TEST(Scan, HandUnrolledImpulse) {
  const ssm::LtiParams p{{0.5}, {1.0}, {1.0}, 0.0};
  const std::vector<double> x{1, 0, 0};
  EXPECT_EQ(ssm::selective_scan(x, p.broadcast(3)), (std::vector<double>{1, 0.5, 0.25}));
  EXPECT_EQ(ssm::lti_kernel_scan(x, p), (std::vector<double>{1, 0.5, 0.25}));
  EXPECT_EQ(ssm::lti_kernel(p, 3), (std::vector<double>{1, 0.5, 0.25}));
}

TEST(Scan, PassThroughAndZero) {
  const ssm::LtiParams p{{0.3, 0.9}, {1.0, 2.0}, {0.0, 0.0}, 1.0};
  const std::vector<double> x{0.4, -1.0, 2.5};
  EXPECT_EQ(ssm::selective_scan(x, p.broadcast(3)), x);
  const ssm::LtiParams q{{0.3}, {1.0}, {1.0}, 0.7};
  EXPECT_EQ(ssm::selective_scan(std::vector<double>(4, 0.0), q.broadcast(4)), std::vector<double>(4, 0.0));
}

TEST(Scan, SingleStep) {
  const ssm::LtiParams p{{0.3, 0.6}, {2.0, 1.0}, {0.5, 4.0}, 0.25};
  const std::vector<double> x{3.0};
  EXPECT_NEAR(ssm::lti_kernel_scan(x, p)[0], (0.5 * 2.0 + 4.0 * 1.0 + 0.25) * 3.0, 1e-15);
}

TEST(Scan, MatchesScalarOracle) {
  Rng rng(2);
  std::vector<double> x(20);
  for (double& v : x) v = rng.uniform(-1, 1);
  const ssm::LtiParams p{{0.8}, {0.6}, {1.3}, 0.2};
  const auto y = ssm::selective_scan(x, p.broadcast(x.size()));
  const auto ref = oracle::scalar_recurrence(x, 0.8, 0.6, 1.3, 0.2);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(y[k], ref[k], 1e-14);
}

TEST(Scan, RecurrenceEqualsKernelForm) {
  Rng rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    const std::size_t len = 1 + rng.below(64);
    ssm::LtiParams p;
    const double delta = rng.uniform(1e-3, 1.0);
    for (std::size_t s = 0; s < n; ++s) {
      const auto d = ssm::discretize(-rng.uniform(0.01, 2.0), rng.uniform(-1, 1), delta);
      p.a_bar.push_back(d.a_bar);
      p.b_bar.push_back(d.b_bar);
      p.c.push_back(rng.uniform(-1, 1));
    }
    p.d = rng.uniform(-1, 1);
    std::vector<double> x(len);
    for (double& v : x) v = rng.uniform(-1, 1);
    const auto a = ssm::selective_scan(x, p.broadcast(len));
    const auto b = ssm::lti_kernel_scan(x, p);
    for (std::size_t k = 0; k < len; ++k) {
      worst = std::max(worst, std::fabs(a[k] - b[k]) / std::max(1.0, std::fabs(a[k])));
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Scan, Errors) {
  const ssm::LtiParams p{{0.5}, {1.0}, {1.0}, 0.0};
  EXPECT_THROW(ssm::selective_scan(std::vector<double>(4), p.broadcast(3)), DimensionError);
  auto varying = p.broadcast(3);
  varying.a_bar[1] = 0.4;
  EXPECT_THROW(ssm::lti_kernel_scan(std::vector<double>(3), varying), ContractError);
}

TEST(Scan, LongSequenceStaysBounded) {
  const auto d = ssm::discretize(-0.05, 1.0, 0.1);
  const ssm::LtiParams p{{d.a_bar}, {d.b_bar}, {1.0}, 0.0};
  Rng rng(4);
  std::vector<double> x(10000);
  for (double& v : x) v = rng.uniform(-1, 1);
  const double bound = std::fabs(d.b_bar) / (1.0 - d.a_bar);
  for (double y : ssm::selective_scan(x, p.broadcast(x.size()))) {
    ASSERT_TRUE(std::isfinite(y));
    ASSERT_LE(std::fabs(y), bound + 1e-9);
  }
}

TEST(Scan, TensorFormMatchesPerChannelReference) {
  Rng rng(5);
  const std::size_t dch = 3, n = 2, len = 7;
  auto rnd = [&](Shape s, double lo, double hi) {
    std::vector<double> v(shape_numel(s));
    for (double& e : v) e = rng.uniform(lo, hi);
    return Tensor(std::move(s), std::move(v));
  };
  Tensor x = rnd({dch, len}, -1, 1), delta = rnd({dch, len}, 0.05, 0.8), a = rnd({dch, n}, -2, -0.1);
  Tensor b = rnd({n, len}, -1, 1), c = rnd({n, len}, -1, 1), skip = rnd({dch}, -1, 1);
  Tensor y = ssm::selective_scan(x, delta, a, b, c, skip);
  for (std::size_t ch = 0; ch < dch; ++ch) {
    ssm::StepParams p;
    p.state_dim = n;
    p.d = skip[ch];
    std::vector<double> xs;
    for (std::size_t k = 0; k < len; ++k) {
      xs.push_back(x[ch * len + k]);
      for (std::size_t s = 0; s < n; ++s) {
        const auto dd = ssm::discretize(a[ch * n + s], b[s * len + k], delta[ch * len + k]);
        p.a_bar.push_back(dd.a_bar);
        p.b_bar.push_back(dd.b_bar);
        p.c.push_back(c[s * len + k]);
      }
    }
    const auto ref = ssm::selective_scan(xs, p);
    for (std::size_t k = 0; k < len; ++k) EXPECT_NEAR(y[ch * len + k], ref[k], 1e-13);
  }
}

TEST(Scan, TensorGradients) {
  Rng rng(6);
  auto rnd = [&](Shape s, double lo, double hi) {
    std::vector<double> v(shape_numel(s));
    for (double& e : v) e = rng.uniform(lo, hi);
    Tensor t(std::move(s), std::move(v));
    t.set_requires_grad(true);
    return t;
  };
  Tensor x = rnd({2, 5}, -1, 1), delta = rnd({2, 5}, 0.1, 0.9), a = rnd({2, 3}, -1.5, -0.2);
  Tensor b = rnd({3, 5}, -1, 1), c = rnd({3, 5}, -1, 1), skip = rnd({2}, -1, 1);
  std::vector<double> wv(10);
  for (double& v : wv) v = rng.uniform(-1, 1);
  const Tensor w({2, 5}, wv);
  const auto r = check_gradients(
      "selective_scan", [&] { return sum(mul(ssm::selective_scan(x, delta, a, b, c, skip), w)); },
      {x, delta, a, b, c, skip}, rng);
  EXPECT_LE(r.max_rel_err, 1e-3);
}
