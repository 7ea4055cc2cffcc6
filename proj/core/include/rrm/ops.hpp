#pragma once

#include <cstddef>
#include <span>

#include "rrm/tensor.hpp"

// Differentiable primitives. Every function records a tape entry when any
// input requires a gradient, and each entry carries an exact analytic
// backward. Image tensors are [C, H, W]; sequences are [C, L].

namespace rrm {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

/// [M, K] x [K, N] -> [M, N].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x: [C, ...] -> [1, ...], the mean over the leading axis.
Tensor mean_over_channels(const Tensor& x);

/// Concatenation along the leading axis; trailing extents must agree.
Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Rows [begin, begin + count) of the leading axis.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

/// Normalizes over the leading axis independently at every trailing position,
/// then applies the optional per-channel affine (gamma, beta of shape [C]).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

Tensor silu(const Tensor& x);
/// Exact erf form: 0.5 x (1 + erf(x / sqrt 2)).
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor exp(const Tensor& x);

/// [C, H, W] -> [C].
Tensor global_avg_pool(const Tensor& x);
/// x: [C, ...], s: [C]; multiplies channel c by s[c].
Tensor scale_by_channel(const Tensor& x, const Tensor& s);
/// x: [C, ...], b: [C]; adds b[c] to channel c.
Tensor add_channel_bias(const Tensor& x, const Tensor& b);
/// Multiplies every element by the single value held in s.
Tensor scale_by_scalar(const Tensor& x, const Tensor& s);

/// [C r^2, H, W] -> [C, H r, W r]; out[c, h r + i, w r + j] = in[c r^2 + i r + j, h, w].
Tensor pixel_shuffle(const Tensor& x, std::size_t r);
/// Keeps every r-th row and column starting at the origin.
Tensor strided_downsample(const Tensor& x, std::size_t r);

/// Cross-correlation. x: [Cin, H, W]; weight: [Cout, Cin, k, k]; bias: [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);
/// Gradient-of-conv layout. x: [Cin, H, W]; weight: [Cin, Cout, k, k]; no padding.
/// Output extent is (H - 1) stride + k.
Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                         std::size_t stride);

/// x: [C, L]; out[c, k] = x[c, order[k]].
Tensor gather_permute(const Tensor& x, std::span<const std::size_t> order);
/// Inverse of gather_permute: out[c, order[k]] = x[c, k].
Tensor scatter_inverse(const Tensor& x, std::span<const std::size_t> order);

/// Elementwise sum of equally shaped tensors using a fixed balanced pairwise
/// tree, so 2^n identical terms sum exactly.
Tensor sum_list(std::span<const Tensor> parts);

Tensor reshape(const Tensor& x, Shape shape);

/// Scalar reductions, shape [1].
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_abs_diff(const Tensor& a, const Tensor& b);
Tensor mean_sq_diff(const Tensor& a, const Tensor& b);

}  // namespace rrm
