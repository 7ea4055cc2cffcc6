#include "rrm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rrm/error.hpp"
#include "rrm/metrics.hpp"
#include "rrm/ops.hpp"
#include "rrm/optim.hpp"
#include "rrm/rng.hpp"

namespace rrm {

namespace {

Tensor pixel_distance(const Tensor& a, const Tensor& b, PixelLoss kind) {
  return kind == PixelLoss::L2 ? mean_sq_diff(a, b) : mean_abs_diff(a, b);
}

Tensor clip01(const Tensor& x) {
  std::vector<double> v(x.data().begin(), x.data().end());
  for (double& e : v) e = std::clamp(e, 0.0, 1.0);
  return Tensor(x.shape(), std::move(v));
}

Tensor flip(const Tensor& x, bool horizontal) {
  if (x.rank() != 3) throw DimensionError("flip expects [C, H, W], got " + shape_string(x.shape()));
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  std::vector<double> out(x.numel());
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t i = 0; i < w; ++i) {
        const std::size_t sy = horizontal ? y : h - 1 - y;
        const std::size_t sx = horizontal ? w - 1 - i : i;
        out[(k * h + y) * w + i] = x[(k * h + sy) * w + sx];
      }
    }
  }
  return Tensor(x.shape(), std::move(out));
}

}  // namespace

Tensor total_loss(const Tensor& o1, const Tensor& o2, const Tensor& gt_raw, const Tensor& gt_srgb,
                  const LossConfig& cfg) {
  if (o1.shape() != gt_raw.shape()) {
    throw DimensionError("raw prediction " + shape_string(o1.shape()) + " vs target " + shape_string(gt_raw.shape()));
  }
  if (o2.shape() != gt_srgb.shape()) {
    throw DimensionError("sRGB prediction " + shape_string(o2.shape()) + " vs target " +
                         shape_string(gt_srgb.shape()));
  }
  Tensor loss = scale(pixel_distance(o2, gt_srgb, cfg.srgb_loss), cfg.beta_srgb);
  if (cfg.raw_loss != PixelLoss::None && cfg.alpha_raw != 0.0) {
    loss = add(scale(pixel_distance(o1, gt_raw, cfg.raw_loss), cfg.alpha_raw), loss);
  }
  return loss;
}

Tensor flip_horizontal(const Tensor& x) { return flip(x, true); }
Tensor flip_vertical(const Tensor& x) { return flip(x, false); }

EvalReport evaluate(const RetinexRawMamba& net, const Dataset& data, const LossConfig& loss) {
  NoGradGuard no_grad;
  EvalReport r;
  for (const Sample& s : data.samples) {
    const NetworkOutput out = net.forward(s.input);
    r.loss += total_loss(out.raw, out.srgb, s.clean_packed, s.clean_rgb, loss).item();
    const Tensor rgb = clip01(out.srgb);
    const double p = psnr(rgb, s.clean_rgb);
    r.sample_psnr.push_back(p);
    r.psnr += p;
    r.ssim += ssim(rgb, s.clean_rgb);
    r.raw_psnr += psnr(clip01(out.raw), s.clean_packed);
  }
  const double n = static_cast<double>(data.samples.size());
  r.loss /= n;
  r.psnr /= n;
  r.ssim /= n;
  r.raw_psnr /= n;
  return r;
}

TrainResult train(RetinexRawMamba& net, const Dataset& data, const TrainConfig& cfg, const LossConfig& loss,
                  const std::function<void(const TrainLogEntry&)>& on_log) {
  cfg.validate();
  loss.validate();
  if (data.samples.empty()) throw ConfigError("training set is empty");
  if (data.config.cfa != net.config().cfa) throw ConfigError("dataset CFA does not match the network CFA");

  TrainResult result;
  result.steps = cfg.steps > 0 ? cfg.steps : cfg.epochs * data.samples.size();
  result.before = evaluate(net, data, loss);

  AdamW opt(net.parameters(), cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay);
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.samples.size());
  std::size_t cursor = order.size();

  for (std::size_t t = 0; t < result.steps; ++t) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      cursor = 0;
    }
    const Sample& s = data.samples[order[cursor++]];
    Tensor input = s.input, gt_raw = s.clean_packed, gt_rgb = s.clean_rgb;
    if (cfg.augment) {
      if (rng.coin()) {
        input = flip_horizontal(input);
        gt_raw = flip_horizontal(gt_raw);
        gt_rgb = flip_horizontal(gt_rgb);
      }
      if (rng.coin()) {
        input = flip_vertical(input);
        gt_raw = flip_vertical(gt_raw);
        gt_rgb = flip_vertical(gt_rgb);
      }
    }

    const double lr = scheduled_lr(cfg, t, result.steps);
    const NetworkOutput out = net.forward(input);
    const Tensor l = total_loss(out.raw, out.srgb, gt_raw, gt_rgb, loss);
    const double value = l.item();
    if (!std::isfinite(value)) throw NumericError("non-finite loss at step " + std::to_string(t + 1));
    backward(l);
    if (cfg.grad_clip > 0.0) opt.clip_grad_norm(cfg.grad_clip);
    opt.step(lr);

    const TrainLogEntry entry{t + 1, value, lr};
    result.log.push_back(entry);
    const bool report = t == 0 || t + 1 == result.steps || (cfg.log_every > 0 && (t + 1) % cfg.log_every == 0);
    if (report && on_log) on_log(entry);
  }
  result.after = evaluate(net, data, loss);
  return result;
}

}  // namespace rrm
