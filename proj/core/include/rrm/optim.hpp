#pragma once

#include <cstddef>
#include <vector>

#include "rrm/config.hpp"
#include "rrm/layers.hpp"

namespace rrm {

/// lr(t) = lr_final + (lr_init - lr_final)(1 + cos(pi t / horizon)) / 2 for
/// t <= horizon, and lr_final afterwards.
double cosine_lr(double lr_init, double lr_final, std::size_t t, std::size_t horizon);

/// Learning rate for step t under cfg.schedule.
double scheduled_lr(const TrainConfig& cfg, std::size_t t, std::size_t total_steps);

/// AdamW with decoupled weight decay: p -= lr wd p, then the bias-corrected
/// Adam update. Parameters are rounded to float after every step when
/// snap_to_float is set.
class AdamW {
 public:
  AdamW(ParamList params, double beta1, double beta2, double eps, double weight_decay, bool snap = true);

  /// Applies one update from the accumulated gradients, then clears them.
  /// A missing gradient counts as zero. Throws NumericError naming the first
  /// parameter with a non-finite gradient, before any parameter is modified.
  void step(double lr);

  /// Rescales all gradients so their joint L2 norm is at most max_norm.
  /// Returns the norm before clipping.
  double clip_grad_norm(double max_norm);

  std::size_t steps_taken() const { return t_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  double beta1_, beta2_, eps_, weight_decay_;
  bool snap_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace rrm
