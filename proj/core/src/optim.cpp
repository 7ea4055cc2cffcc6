#include "rrm/optim.hpp"

#include <cmath>
#include <numbers>

#include "rrm/error.hpp"

namespace rrm {

double cosine_lr(double lr_init, double lr_final, std::size_t t, std::size_t horizon) {
  if (horizon == 0) return lr_init;
  if (t >= horizon) return lr_final;
  const double frac = static_cast<double>(t) / static_cast<double>(horizon);
  return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(std::numbers::pi * frac));
}

double scheduled_lr(const TrainConfig& cfg, std::size_t t, std::size_t total_steps) {
  if (cfg.schedule == "constant") return cfg.lr_init;
  const std::size_t horizon = cfg.cosine_steps > 0 ? cfg.cosine_steps : total_steps;
  return cosine_lr(cfg.lr_init, cfg.lr_final, t, horizon);
}

AdamW::AdamW(ParamList params, double beta1, double beta2, double eps, double weight_decay, bool snap)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay), snap_(snap) {
  for (const NamedParam& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

double AdamW::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const NamedParam& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.impl()->grad) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const NamedParam& p : params_) {
      for (double& g : p.tensor.impl()->grad) g *= factor;
    }
  }
  return norm;
}

void AdamW::step(double lr) {
  for (const NamedParam& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& param = params_[k].tensor;
    const std::vector<double> grad = param.has_grad() ? param.grad() : std::vector<double>(param.numel(), 0.0);
    auto values = param.mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] -= lr * weight_decay_ * values[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      values[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
    if (snap_) snap_to_float(param);
    param.zero_grad();
  }
}

}  // namespace rrm
