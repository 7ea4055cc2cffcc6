#include "rrm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rrm/blocks.hpp"
#include "rrm/config.hpp"
#include "rrm/error.hpp"
#include "rrm/network.hpp"
#include "rrm/ops.hpp"
#include "rrm/ssm.hpp"
#include "rrm/train.hpp"

namespace rrm {

GradcheckResult check_gradients(const std::string& name, const std::function<Tensor()>& f,
                                const std::vector<Tensor>& inputs, Rng& rng, const GradcheckOptions& opts) {
  for (const Tensor& t : inputs) {
    if (!t.requires_grad()) throw ContractError("gradcheck '" + name + "': input does not require grad");
  }
  for (Tensor t : inputs) t.zero_grad();
  backward(f());
  std::vector<std::vector<double>> analytic;
  for (const Tensor& t : inputs) analytic.push_back(t.grad());
  for (Tensor t : inputs) t.zero_grad();

  GradcheckResult result{name, 0.0, 0};
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor t = inputs[k];
    const std::size_t n = t.numel();
    std::vector<std::size_t> entries;
    if (opts.max_entries == 0 || opts.max_entries >= n) {
      for (std::size_t i = 0; i < n; ++i) entries.push_back(i);
    } else {
      for (std::size_t s = 0; s < opts.max_entries; ++s) entries.push_back(rng.below(n));
    }
    for (std::size_t i : entries) {
      auto values = t.mutable_data();
      const double saved = values[i];
      values[i] = saved + opts.step;
      const double up = f().item();
      values[i] = saved - opts.step;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      result.max_rel_err = std::max(result.max_rel_err, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

Tensor random_probe(const Tensor& x, Rng& rng) {
  std::vector<double> w(x.numel());
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return sum(mul(x, Tensor(x.shape(), std::move(w))));
}

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& e : v) e = rng.uniform(lo, hi);
  Tensor t(std::move(shape), std::move(v));
  t.set_requires_grad(true);
  return t;
}

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const NamedParam& p : params) out.push_back(p.tensor);
  return out;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradcheckResult> out;
  GradcheckOptions all;
  GradcheckOptions sampled;
  sampled.max_entries = 4;

  auto unary = [&](const std::string& name, Tensor (*op)(const Tensor&), double lo, double hi) {
    Tensor x = random_tensor({2, 3, 4}, rng, lo, hi);
    Rng probe = rng.fork(out.size());
    out.push_back(check_gradients(name, [&, probe]() mutable {
      Rng p = probe;
      return random_probe(op(x), p);
    }, {x}, rng, all));
  };
  // Every probe below replays the same weights by copying its generator.
  auto probed = [&](const std::string& name, const std::function<Tensor()>& f, const std::vector<Tensor>& in,
                    const GradcheckOptions& opts) {
    const Rng probe = rng.fork(1000 + out.size());
    out.push_back(check_gradients(name, [&f, probe]() {
      Rng p = probe;
      return random_probe(f(), p);
    }, in, rng, opts));
  };

  unary("silu", silu, -3, 3);
  unary("gelu", gelu, -3, 3);
  unary("sigmoid", sigmoid, -3, 3);
  unary("relu", relu, 0.1, 2);  // away from the kink
  unary("softplus", softplus, -3, 3);
  unary("exp", exp, -2, 2);
  unary("mean_over_channels", mean_over_channels, -1, 1);
  unary("global_avg_pool", global_avg_pool, -1, 1);
  unary("layer_norm", [](const Tensor& x) { return layer_norm(x); }, -1, 1);

  {
    Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({2, 3, 4}, rng);
    probed("add", [&] { return add(a, b); }, {a, b}, all);
    probed("sub", [&] { return sub(a, b); }, {a, b}, all);
    probed("mul", [&] { return mul(a, b); }, {a, b}, all);
    probed("scale", [&] { return scale(a, -1.7); }, {a}, all);
    probed("concat_channels", [&] { return concat_channels(a, b); }, {a, b}, all);
    probed("slice_channels", [&] { return slice_channels(a, 1, 1); }, {a}, all);
    probed("reshape", [&] { return reshape(a, {6, 4}); }, {a}, all);
    probed("strided_downsample", [&] { return strided_downsample(a, 2); }, {a}, all);
    probed("mean_abs_diff", [&] { return mean_abs_diff(a, b); }, {a, b}, all);
    probed("mean_sq_diff", [&] { return mean_sq_diff(a, b); }, {a, b}, all);
    probed("sum", [&] { return sum(a); }, {a}, all);
    probed("mean", [&] { return mean(a); }, {a}, all);
    std::vector<Tensor> parts = {a, b, random_tensor({2, 3, 4}, rng)};
    probed("sum_list", [&] { return sum_list(parts); }, parts, all);
  }
  {
    Tensor x = random_tensor({3, 4, 5}, rng), g = random_tensor({3}, rng), b = random_tensor({3}, rng);
    probed("layer_norm_affine", [&] { return layer_norm(x, g, b); }, {x, g, b}, all);
    probed("scale_by_channel", [&] { return scale_by_channel(x, g); }, {x, g}, all);
    probed("add_channel_bias", [&] { return add_channel_bias(x, b); }, {x, b}, all);
    Tensor s = random_tensor({1}, rng);
    probed("scale_by_scalar", [&] { return scale_by_scalar(x, s); }, {x, s}, all);
  }
  {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
    probed("matmul", [&] { return matmul(a, b); }, {a, b}, all);
    Tensor x = random_tensor({8, 2, 3}, rng);
    probed("pixel_shuffle", [&] { return pixel_shuffle(x, 2); }, {x}, all);
  }
  {
    Tensor x = random_tensor({2, 5, 6}, rng);
    Tensor w3 = random_tensor({3, 2, 3, 3}, rng), b3 = random_tensor({3}, rng);
    probed("conv2d_3x3", [&] { return conv2d(x, w3, b3, 1, 1); }, {x, w3, b3}, all);
    probed("conv2d_3x3_stride2", [&] { return conv2d(x, w3, b3, 2, 1); }, {x, w3, b3}, all);
    Tensor w5 = random_tensor({2, 2, 5, 5}, rng);
    probed("conv2d_5x5", [&] { return conv2d(x, w5, Tensor{}, 1, 2); }, {x, w5}, all);
    Tensor wt = random_tensor({2, 3, 2, 2}, rng), bt = random_tensor({3}, rng);
    probed("transposed_conv2d", [&] { return transposed_conv2d(x, wt, bt, 2); }, {x, wt, bt}, all);
  }
  {
    Tensor x = random_tensor({2, 6}, rng);
    const std::vector<std::size_t> order = {3, 0, 5, 1, 4, 2};
    probed("gather_permute", [&] { return gather_permute(x, order); }, {x}, all);
    probed("scatter_inverse", [&] { return scatter_inverse(x, order); }, {x}, all);
  }
  {
    const std::size_t d = 3, l = 7, n = 4;
    Tensor x = random_tensor({d, l}, rng);
    Tensor delta = random_tensor({d, l}, rng, 0.05, 1.0);
    Tensor a = random_tensor({d, n}, rng, -2.0, -0.1);
    Tensor b = random_tensor({n, l}, rng), c = random_tensor({n, l}, rng), skip = random_tensor({d}, rng);
    probed("selective_scan", [&] { return ssm::selective_scan(x, delta, a, b, c, skip); }, {x, delta, a, b, c, skip},
           all);
    Tensor tiny = random_tensor({d, l}, rng, 1e-6, 1e-5);
    probed("selective_scan_small_step", [&] { return ssm::selective_scan(x, tiny, a, b, c, skip); },
           {x, a, b, c, skip}, all);
  }

  const std::size_t ch = 4;
  auto block_case = [&](const std::string& name, const ParamList& params, const std::function<Tensor(const Tensor&)>& fn,
                        Shape in_shape) {
    Tensor x = random_tensor(std::move(in_shape), rng);
    std::vector<Tensor> inputs = tensors_of(params);
    inputs.push_back(x);
    probed(name, [&] { return fn(x); }, inputs, sampled);
  };
  {
    Rng init = rng.fork(7);
    ChannelAttention ca(ch, 2, init);
    ParamList p;
    ca.collect(p, "ca");
    block_case("channel_attention", p, [&](const Tensor& x) { return ca(x); }, {ch, 4, 4});

    SelectiveScan2d ss(ch, 3, 8, init);
    p.clear();
    ss.collect(p, "ss2d");
    block_case("ss2d", p, [&](const Tensor& x) { return ss(x); }, {ch, 3, 4});

    RawSsm rs(ch, 3, 8, init);
    p.clear();
    rs.collect(p, "rawssm");
    block_case("rawssm", p, [&](const Tensor& x) { return rs(x); }, {ch, 4, 4});

    RawMambaBlock rm(ch, 3, 8, 2, init);
    p.clear();
    rm.collect(p, "rawmamba");
    block_case("rawmamba", p, [&](const Tensor& x) { return rm(x); }, {ch, 4, 4});

    RetinexDecomposition rdm(4, ch, init);
    p.clear();
    rdm.collect(p, "rdm");
    block_case("rdm", p, [&](const Tensor& x) {
      const auto o = rdm(x);
      return concat_channels(std::vector<Tensor>{o.light, o.reflectance, o.adjusted});
    }, {4, 4, 4});

    DomainAdaptiveFusion daf(ch, 2, init);
    p.clear();
    daf.collect(p, "daf");
    Tensor pre = random_tensor({ch, 4, 4}, rng);
    p.push_back({"pre", pre});
    block_case("daf", p, [&](const Tensor& x) { return daf(pre, x); }, {ch, 4, 4});

    SimpleDenoisingBlock sdb(ch, init);
    p.clear();
    sdb.collect(p, "sdb");
    block_case("sdb", p, [&](const Tensor& x) { return sdb(x); }, {ch, 4, 4});
  }
  {
    NetworkConfig cfg;
    cfg.depth = 2;
    cfg.base_width = 4;
    cfg.state_dim = 2;
    const RetinexRawMamba net(cfg, seed);
    std::vector<Tensor> params = tensors_of(net.parameters());
    Tensor x = random_tensor({4, 4, 4}, rng, 0.0, 1.0);
    params.push_back(x);
    const Rng probe = rng.fork(99);
    out.push_back(check_gradients("network_two_stage", [&, probe] {
      Rng p = probe;
      const NetworkOutput o = net.forward(x);
      return add(random_probe(o.raw, p), random_probe(o.srgb, p));
    }, params, rng, sampled));
  }
  return out;
}

}  // namespace rrm
