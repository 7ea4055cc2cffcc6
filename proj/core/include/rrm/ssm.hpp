#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rrm/tensor.hpp"

namespace rrm::ssm {

/// Below this |delta * a| the ZOH input gain uses its first-order Taylor form.
inline constexpr double kZohTaylorThreshold = 1e-4;

struct Discretized {
  double a_bar;
  double b_bar;
};

/// Zero-order hold for one diagonal state entry:
/// a_bar = exp(delta a), b_bar = (exp(delta a) - 1) / (delta a) * delta b.
/// Throws ContractError when delta <= 0.
Discretized discretize(double a, double b, double delta);

/// (exp(z) - 1) / z with the removable singularity at 0 filled in.
double zoh_gain(double z);
/// d/dz of zoh_gain.
double zoh_gain_derivative(double z);

/// Discrete diagonal SSM for one channel, laid out [step][state].
struct StepParams {
  std::size_t state_dim = 0;
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  std::vector<double> c;
  double d = 0.0;

  std::size_t steps() const { return state_dim == 0 ? 0 : a_bar.size() / state_dim; }
};

/// Time-invariant parameters, one value per state entry.
struct LtiParams {
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  std::vector<double> c;
  double d = 0.0;

  /// Replicates the constants across `steps` steps.
  StepParams broadcast(std::size_t steps) const;
};

/// h_k = a_bar_k h_{k-1} + b_bar_k x_k, y_k = c_k . h_k + d x_k, with h_{-1} = 0.
/// Throws DimensionError if the step count of p differs from x.size().
std::vector<double> selective_scan(std::span<const double> x, const StepParams& p);

/// K = (c.b_bar, c.(a_bar b_bar), ..., c.(a_bar^{L-1} b_bar)).
std::vector<double> lti_kernel(const LtiParams& p, std::size_t length);

/// Causal convolution y = x * K plus the skip term d x.
std::vector<double> lti_kernel_scan(std::span<const double> x, const LtiParams& p);

/// Kernel form on step parameters; throws ContractError if any parameter
/// varies across steps.
std::vector<double> lti_kernel_scan(std::span<const double> x, const StepParams& p);

/// Differentiable selective scan over D channels and L steps, discretizing
/// with zoh at every step.
///
///   x     [D, L]  input sequence
///   delta [D, L]  positive step sizes
///   a     [D, N]  continuous diagonal state matrix (negative for decay)
///   b     [N, L]  input projection, shared across channels
///   c     [N, L]  output projection, shared across channels
///   skip  [D]     feed-through
///
/// Returns y [D, L].
Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b,
                      const Tensor& c, const Tensor& skip);

}  // namespace rrm::ssm
