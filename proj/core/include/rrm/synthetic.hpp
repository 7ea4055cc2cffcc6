#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "rrm/config.hpp"
#include "rrm/raw_io.hpp"
#include "rrm/tensor.hpp"

namespace rrm {

struct Sample {
  std::string name;
  Tensor clean_rgb;     // GT_srgb [3, H, W], values k / 255
  Tensor clean_packed;  // GT_raw, packed CFA samples of clean_rgb
  RawImage noisy;       // dark, noisy u16 mosaic
  Tensor input;         // pack(noisy)
  double baseline_psnr = 0.0;  // psnr(input, clean_packed)
};

struct Dataset {
  DataConfig config;
  std::vector<Sample> samples;
  /// Mean over samples of the noisy-input PSNR.
  double baseline_psnr = 0.0;
};

/// Procedural scenes (gradient background, rectangles, disks) quantized to 8
/// bits, darkened by the exposure ratio, sampled through the CFA, corrupted and
/// quantized to u16 counts:
///
///   amplified = m + n,  n ~ N(0, read_noise^2 + ratio m / full_well)
///   counts    = round(black + (white - black) amplified / ratio)
///
/// where m is the clean mosaic value in [0, 1]. Deterministic in config.seed.
Dataset gen_synthetic(const DataConfig& config);

/// One RAW container and one PPM per sample plus index.json.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace rrm
