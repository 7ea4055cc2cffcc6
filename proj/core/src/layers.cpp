#include "rrm/layers.hpp"

#include <cmath>

#include "rrm/error.hpp"
#include "rrm/ops.hpp"

namespace rrm {

void snap_to_float(Tensor& t) {
  for (double& v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
}

Tensor make_param(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  snap_to_float(t);
  t.set_requires_grad(true);
  return t;
}

std::vector<double> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(count);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return values;
}

std::size_t param_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng, std::size_t stride_)
    : stride(stride_), padding((kernel - 1) / 2) {
  if (kernel % 2 == 0) throw ConfigError("Conv2d: kernel size must be odd, got " + std::to_string(kernel));
  const std::size_t fan_in = in_channels * kernel * kernel;
  weight = make_param({out_channels, in_channels, kernel, kernel},
                      kaiming_uniform(out_channels * fan_in, fan_in, rng));
  bias = make_param({out_channels}, std::vector<double>(out_channels, 0.0));
}

Tensor Conv2d::operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

void identity_centred(Conv2d& conv, std::size_t offset, double scale) {
  const std::size_t out = conv.out_channels(), in = conv.in_channels();
  if (conv.weight.dim(2) != 1 || offset + out > in) {
    throw ConfigError("identity_centred needs a 1x1 convolution with enough input channels");
  }
  auto w = conv.weight.mutable_data();
  for (double& v : w) v *= scale;
  for (std::size_t o = 0; o < out; ++o) w[o * in + offset + o] += 1.0;
  snap_to_float(conv.weight);
}

ConvTranspose2d::ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t factor_, Rng& rng)
    : factor(factor_) {
  // PyTorch computes fan-in of a transposed conv from weight.size(1).
  const std::size_t fan_in = out_channels * factor * factor;
  weight = make_param({in_channels, out_channels, factor, factor},
                      kaiming_uniform(in_channels * fan_in, fan_in, rng));
  bias = make_param({out_channels}, std::vector<double>(out_channels, 0.0));
}

Tensor ConvTranspose2d::operator()(const Tensor& x) const { return transposed_conv2d(x, weight, bias, factor); }

void ConvTranspose2d::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

LayerNorm::LayerNorm(std::size_t channels)
    : gamma(make_param({channels}, std::vector<double>(channels, 1.0))),
      beta(make_param({channels}, std::vector<double>(channels, 0.0))) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, kEps); }

void LayerNorm::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

}  // namespace rrm
