#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rrm/layers.hpp"
#include "rrm/rng.hpp"
#include "rrm/tensor.hpp"

namespace rrm {

/// Sequence model for one scan direction: (slot, [C, L]) -> [C, L], where slot is
/// the position of the direction in the enabled list.
using DirectionalSsm = std::function<Tensor(std::size_t, const Tensor&)>;

/// Eight-way cross-scan merge over a [C, h, w] map.
///
/// For each enabled direction the flattened map is permuted into that
/// direction's visit order, passed through `ssm`, and scattered back to
/// raster order. The un-permuted outputs are summed in enumeration order.
Tensor cross_scan_merge(const Tensor& features, std::span<const std::size_t> directions, const DirectionalSsm& ssm);

/// Squeeze-excitation channel attention:
/// s = sigmoid(W2 relu(W1 gap(X) + b1) + b2), out = X scaled per channel by s.
class ChannelAttention {
 public:
  ChannelAttention() = default;
  /// Throws ConfigError unless reduction divides channels.
  ChannelAttention(std::size_t channels, std::size_t reduction, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Tensor squeeze_weight;  // [C / r, C]
  Tensor squeeze_bias;    // [C / r]
  Tensor excite_weight;   // [C, C / r]
  Tensor excite_bias;     // [C]
};

/// Selective SSM parameters of one scan direction.
struct DirectionSsm {
  Tensor x_proj;   // [dt_rank + 2N, C], produces (dt, B, C) per position
  Tensor dt_proj;  // [C, dt_rank]
  Tensor dt_bias;  // [C]
  Tensor a_log;    // [C, N], A = -exp(a_log)
  Tensor skip;     // [C]

  /// [C, L] -> [C, L].
  Tensor operator()(const Tensor& seq) const;
};

/// SS2D: selective scans along the enabled directions, merged by cross_scan_merge.
class SelectiveScan2d {
 public:
  SelectiveScan2d() = default;
  SelectiveScan2d(std::size_t channels, std::size_t state_dim, std::size_t num_directions, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t state_dim() const { return state_dim_; }
  std::size_t dt_rank() const { return dt_rank_; }
  const std::vector<std::size_t>& directions() const { return directions_; }

  /// One entry per enabled direction, in enumeration order.
  std::vector<DirectionSsm> ssms;

 private:
  std::size_t state_dim_ = 0;
  std::size_t dt_rank_ = 0;
  std::vector<std::size_t> directions_;
};

/// x, z = chunk(Linear(X)); x = LN(SS2D(SiLU(Conv3(x)))); out = x * SiLU(z).
/// Linear is a per-pixel 1x1 convolution.
class RawSsm {
 public:
  RawSsm() = default;
  RawSsm(std::size_t channels, std::size_t state_dim, std::size_t num_directions, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Conv2d in_proj;  // C -> 2C, 1x1
  Conv2d conv;     // C -> C, 3x3
  SelectiveScan2d ss2d;
  LayerNorm norm;
};

/// t = alpha X + RAWSSM(LN(X)); out = beta t + CA(GELU(Conv3(LN(t)))).
class RawMambaBlock {
 public:
  RawMambaBlock() = default;
  RawMambaBlock(std::size_t channels, std::size_t state_dim, std::size_t num_directions, std::size_t ca_reduction,
                Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  LayerNorm norm1;
  RawSsm ssm;
  Tensor alpha;  // [1], starts at 1
  Tensor beta;   // [1], starts at 1
  LayerNorm norm2;
  Conv2d conv;
  ChannelAttention ca;
};

/// Retinex decomposition of a packed input X [C_in, h, w].
///
/// M = mean over channels of X; R = GELU(Conv3(Conv5(Conv1(cat[X, M])))) with
/// C channels; L = Conv1(R) back to C_in channels; X_in = X * L.
class RetinexDecomposition {
 public:
  struct Output {
    Tensor light;        // L  [C_in, h, w]
    Tensor reflectance;  // R  [C, h, w]
    Tensor adjusted;     // X_in [C_in, h, w]
  };

  RetinexDecomposition() = default;
  RetinexDecomposition(std::size_t in_channels, std::size_t channels, Rng& rng);

  Output operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Conv2d conv1;
  Conv2d conv5;
  Conv2d conv3;
  Conv2d to_light;
};

/// Domain adaptive fusion of a previous-domain feature into the current one:
///   T = Conv3(cat(pre, cur)); T = Conv1(CA(T)); T = T * Conv1(GELU(pre));
///   T = Conv1(GELU(T)); out = Conv1(T + cur).
class DomainAdaptiveFusion {
 public:
  DomainAdaptiveFusion() = default;
  DomainAdaptiveFusion(std::size_t channels, std::size_t ca_reduction, Rng& rng);

  Tensor operator()(const Tensor& pre, const Tensor& cur) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Conv2d merge;     // 2C -> C, 3x3
  ChannelAttention ca;
  Conv2d after_ca;  // 1x1
  Conv2d gate;      // 1x1 on GELU(pre)
  Conv2d mix;       // 1x1
  Conv2d out;       // 1x1
};

/// Ablation baseline: Conv1(cat(pre, cur)).
class ConcatFusion {
 public:
  ConcatFusion() = default;
  ConcatFusion(std::size_t channels, Rng& rng);

  Tensor operator()(const Tensor& pre, const Tensor& cur) const;
  void collect(ParamList& out, const std::string& prefix) const;

  Conv2d conv;
};

enum class FusionKind { Daf, Concat1x1 };

class Fusion {
 public:
  Fusion() = default;
  Fusion(FusionKind kind, std::size_t channels, std::size_t ca_reduction, Rng& rng);

  Tensor operator()(const Tensor& pre, const Tensor& cur) const;
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  std::variant<DomainAdaptiveFusion, ConcatFusion> impl_;
};

/// Simple denoising block: out = X + Conv3(GELU(Conv3(LN(X)))).
class SimpleDenoisingBlock {
 public:
  SimpleDenoisingBlock() = default;
  SimpleDenoisingBlock(std::size_t channels, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;

  LayerNorm norm;
  Conv2d conv1;
  Conv2d conv2;
};

}  // namespace rrm
