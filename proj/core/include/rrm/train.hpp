#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rrm/config.hpp"
#include "rrm/network.hpp"
#include "rrm/synthetic.hpp"
#include "rrm/tensor.hpp"

namespace rrm {

/// alpha * D_raw(O1, GT_raw) + beta * D_srgb(O2, GT_srgb), where D is the mean
/// absolute (l1) or mean squared (l2) difference. A raw term with loss none or
/// alpha = 0 is omitted. Throws DimensionError on shape mismatch.
Tensor total_loss(const Tensor& o1, const Tensor& o2, const Tensor& gt_raw, const Tensor& gt_srgb,
                  const LossConfig& cfg);

/// Mirror of the last (horizontal) or second-to-last (vertical) axis of a [C, H, W] tensor.
Tensor flip_horizontal(const Tensor& x);
Tensor flip_vertical(const Tensor& x);

struct TrainLogEntry {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;
};

struct EvalReport {
  double loss = 0.0;      // mean total loss over samples
  double psnr = 0.0;      // mean sRGB PSNR, output clipped to [0, 1]
  double ssim = 0.0;      // mean sRGB SSIM
  double raw_psnr = 0.0;  // mean PSNR of clipped O1 against GT_raw
  std::vector<double> sample_psnr;
};

EvalReport evaluate(const RetinexRawMamba& net, const Dataset& data, const LossConfig& loss);

struct TrainResult {
  std::size_t steps = 0;
  std::vector<TrainLogEntry> log;
  EvalReport before;  // at the initial parameters
  EvalReport after;   // at the final parameters
};

/// Sequential batch-1 AdamW training. Each epoch visits the samples in a
/// seeded random order; with augment set, each pair is flipped at random.
/// Throws NumericError on a non-finite loss or gradient.
TrainResult train(RetinexRawMamba& net, const Dataset& data, const TrainConfig& cfg, const LossConfig& loss,
                  const std::function<void(const TrainLogEntry&)>& on_log = {});

}  // namespace rrm
