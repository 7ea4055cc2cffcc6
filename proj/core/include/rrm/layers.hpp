#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rrm/rng.hpp"
#include "rrm/tensor.hpp"

namespace rrm {

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

/// Rounds every value to the nearest binary32 number. Parameters are kept
/// float-representable so checkpoints (32-bit blobs) restore them exactly.
void snap_to_float(Tensor& t);

/// Leaf tensor with requires_grad set and float-representable values.
Tensor make_param(Shape shape, std::vector<double> values);

/// Kaiming-uniform with a = sqrt(5): U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
std::vector<double> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng);

std::size_t param_count(const ParamList& params);

/// Same-padding convolution (padding (k - 1) / 2) with bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Rng& rng,
         std::size_t stride = 1);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }

  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Scales the weights of a 1x1 convolution by `scale`, then adds the identity
/// from input channels [offset, offset + out_channels) to the outputs.
void identity_centred(Conv2d& conv, std::size_t offset, double scale);

/// Upsampling by transposed convolution with kernel == stride.
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::size_t in_channels, std::size_t out_channels, std::size_t factor, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor weight;  // [in, out, f, f]
  Tensor bias;    // [out]
  std::size_t factor = 2;
};

/// Channel layer norm with per-channel affine (gamma = 1, beta = 0 at init).
class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  LayerNorm() = default;
  explicit LayerNorm(std::size_t channels);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor gamma;
  Tensor beta;
};

}  // namespace rrm
