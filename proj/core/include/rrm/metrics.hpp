#pragma once

#include "rrm/tensor.hpp"

namespace rrm {

/// 10 log10(max^2 / MSE); +infinity when the inputs are identical.
/// Throws DimensionError on shape mismatch.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);

/// Mean SSIM over channels and window positions for [C, H, W] images.
///
/// Gaussian window 11x11, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range
/// max_val, valid positions only. Images smaller than 11 pixels on a side use
/// a window truncated to the image extent (renormalized).
double ssim(const Tensor& a, const Tensor& b, double max_val = 1.0);

}  // namespace rrm
