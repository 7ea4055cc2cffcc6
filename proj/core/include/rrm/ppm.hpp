#pragma once

#include <cstddef>
#include <filesystem>

#include "rrm/tensor.hpp"

namespace rrm {

/// Binary P6 writer for a [3, H, W] tensor. Values are mapped with
/// floor(255 v + 0.5); anything outside [0, 1] is clipped first and counted.
/// Returns the number of clipped samples.
std::size_t write_ppm(const Tensor& rgb, const std::filesystem::path& path);

/// Reads an 8-bit binary P6 file into a [3, H, W] tensor with values k / 255.
Tensor read_ppm(const std::filesystem::path& path);

/// Byte value written for a sample, after clipping.
unsigned char quantize_u8(double v);

}  // namespace rrm
