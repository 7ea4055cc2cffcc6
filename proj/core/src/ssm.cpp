#include "rrm/ssm.hpp"

#include <cmath>
#include <string>

#include "rrm/error.hpp"

namespace rrm::ssm {

double zoh_gain(double z) {
  if (std::abs(z) < kZohTaylorThreshold) return 1.0 + z / 2.0;
  return std::expm1(z) / z;
}

double zoh_gain_derivative(double z) {
  // Series 1/2 + z/3 + z^2/8 + ... avoids the cancellation in the closed form.
  if (std::abs(z) < 1e-3) return 0.5 + z / 3.0 + z * z / 8.0;
  const double e = std::exp(z);
  return (z * e - std::expm1(z)) / (z * z);
}

Discretized discretize(double a, double b, double delta) {
  if (!(delta > 0.0)) throw ContractError("discretize: delta must be positive");
  const double z = delta * a;
  return {std::exp(z), zoh_gain(z) * delta * b};
}

StepParams LtiParams::broadcast(std::size_t steps) const {
  StepParams p;
  p.state_dim = a_bar.size();
  p.d = d;
  for (std::size_t k = 0; k < steps; ++k) {
    p.a_bar.insert(p.a_bar.end(), a_bar.begin(), a_bar.end());
    p.b_bar.insert(p.b_bar.end(), b_bar.begin(), b_bar.end());
    p.c.insert(p.c.end(), c.begin(), c.end());
  }
  return p;
}

std::vector<double> selective_scan(std::span<const double> x, const StepParams& p) {
  const std::size_t n = p.state_dim;
  if (n == 0 || p.a_bar.size() != x.size() * n || p.b_bar.size() != p.a_bar.size() || p.c.size() != p.a_bar.size()) {
    throw DimensionError("selective_scan: parameters cover " + std::to_string(p.steps()) + " steps for a sequence of " +
                         std::to_string(x.size()));
  }
  std::vector<double> h(n, 0.0);
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = p.d * x[k];
    for (std::size_t s = 0; s < n; ++s) {
      h[s] = p.a_bar[k * n + s] * h[s] + p.b_bar[k * n + s] * x[k];
      acc += p.c[k * n + s] * h[s];
    }
    y[k] = acc;
  }
  return y;
}

std::vector<double> lti_kernel(const LtiParams& p, std::size_t length) {
  const std::size_t n = p.a_bar.size();
  if (p.b_bar.size() != n || p.c.size() != n) throw DimensionError("lti_kernel: parameter sizes differ");
  std::vector<double> kernel(length, 0.0);
  std::vector<double> power(n, 1.0);  // a_bar^k
  for (std::size_t k = 0; k < length; ++k) {
    double acc = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      acc += p.c[s] * power[s] * p.b_bar[s];
      power[s] *= p.a_bar[s];
    }
    kernel[k] = acc;
  }
  return kernel;
}

std::vector<double> lti_kernel_scan(std::span<const double> x, const LtiParams& p) {
  const auto kernel = lti_kernel(p, x.size());
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= k; ++j) acc += kernel[k - j] * x[j];
    y[k] = acc + p.d * x[k];
  }
  return y;
}

std::vector<double> lti_kernel_scan(std::span<const double> x, const StepParams& p) {
  const std::size_t n = p.state_dim;
  if (n == 0 || p.a_bar.size() != x.size() * n || p.b_bar.size() != p.a_bar.size() || p.c.size() != p.a_bar.size()) {
    throw DimensionError("lti_kernel_scan: parameter/sequence length mismatch");
  }
  LtiParams lti{{p.a_bar.begin(), p.a_bar.begin() + static_cast<std::ptrdiff_t>(n)},
                {p.b_bar.begin(), p.b_bar.begin() + static_cast<std::ptrdiff_t>(n)},
                {p.c.begin(), p.c.begin() + static_cast<std::ptrdiff_t>(n)},
                p.d};
  for (std::size_t k = 1; k < x.size(); ++k) {
    for (std::size_t s = 0; s < n; ++s) {
      if (p.a_bar[k * n + s] != lti.a_bar[s] || p.b_bar[k * n + s] != lti.b_bar[s] || p.c[k * n + s] != lti.c[s]) {
        throw ContractError("lti_kernel_scan: parameters vary across steps; use selective_scan");
      }
    }
  }
  return lti_kernel_scan(x, lti);
}

Tensor selective_scan(const Tensor& x, const Tensor& delta, const Tensor& a, const Tensor& b, const Tensor& c,
                      const Tensor& skip) {
  if (x.rank() != 2 || delta.shape() != x.shape() || a.rank() != 2 || b.rank() != 2 || c.shape() != b.shape()) {
    throw DimensionError("selective_scan: x " + shape_string(x.shape()) + ", delta " + shape_string(delta.shape()) +
                         ", a " + shape_string(a.shape()) + ", b " + shape_string(b.shape()) + ", c " +
                         shape_string(c.shape()));
  }
  const std::size_t dch = x.dim(0), len = x.dim(1), n = a.dim(1);
  if (a.dim(0) != dch || b.dim(0) != n || b.dim(1) != len || skip.numel() != dch) {
    throw DimensionError("selective_scan: inconsistent channel/state/length extents");
  }
  for (double v : delta.data()) {
    if (!(v > 0.0)) throw ContractError("selective_scan: delta must be positive");
  }
  // States h_k for every channel and step, [D][L][N].
  std::vector<double> states(dch * len * n);
  std::vector<double> out(dch * len);
  for (std::size_t d = 0; d < dch; ++d) {
    std::vector<double> h(n, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
      const double xv = x[d * len + k];
      const double dt = delta[d * len + k];
      double acc = skip[d] * xv;
      for (std::size_t s = 0; s < n; ++s) {
        const Discretized zoh = discretize(a[d * n + s], b[s * len + k], dt);
        h[s] = zoh.a_bar * h[s] + zoh.b_bar * xv;
        states[(d * len + k) * n + s] = h[s];
        acc += c[s * len + k] * h[s];
      }
      out[d * len + k] = acc;
    }
  }
  FlopCounter::add(dch * len * n * 3);
  Tensor y = make_result({dch, len}, std::move(out));
  if (detail::needs_grad({&x, &delta, &a, &b, &c, &skip})) {
    auto xi = x.impl(), ti = delta.impl(), ai = a.impl(), bi = b.impl(), ci = c.impl(), si = skip.impl();
    auto yi = y.impl();
    detail::record("selective_scan", {x, delta, a, b, c, skip}, y,
                   [=, states = std::move(states)] {
      const auto& dy = yi->grad;
      std::vector<double> gx(dch * len, 0.0), gt(dch * len, 0.0), ga(dch * n, 0.0);
      std::vector<double> gb(n * len, 0.0), gc(n * len, 0.0), gs(dch, 0.0);
      std::vector<double> dh(n);
      for (std::size_t d = 0; d < dch; ++d) {
        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t kk = len; kk-- > 0;) {
          const double gy = dy[d * len + kk];
          const double xv = xi->data[d * len + kk];
          const double dt = ti->data[d * len + kk];
          gs[d] += gy * xv;
          gx[d * len + kk] += gy * si->data[d];
          for (std::size_t s = 0; s < n; ++s) {
            gc[s * len + kk] += gy * states[(d * len + kk) * n + s];
            dh[s] += gy * ci->data[s * len + kk];
          }
          for (std::size_t s = 0; s < n; ++s) {
            const double av = ai->data[d * n + s];
            const double bv = bi->data[s * len + kk];
            const double z = dt * av;
            const double a_bar = std::exp(z);
            const double phi = zoh_gain(z);
            const double dphi = zoh_gain_derivative(z);
            const double h_prev = kk > 0 ? states[(d * len + kk - 1) * n + s] : 0.0;
            const double g_abar = dh[s] * h_prev;
            const double g_bbar = dh[s] * xv;
            gx[d * len + kk] += dh[s] * dt * bv * phi;
            gt[d * len + kk] += g_abar * av * a_bar + g_bbar * bv * (phi + dt * av * dphi);
            ga[d * n + s] += g_abar * dt * a_bar + g_bbar * dt * bv * dphi * dt;
            gb[s * len + kk] += g_bbar * dt * phi;
            dh[s] *= a_bar;
          }
        }
      }
      auto flush = [](const std::shared_ptr<TensorImpl>& t, const std::vector<double>& g) {
        if (!t->requires_grad) return;
        auto& buf = t->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
      };
      flush(xi, gx);
      flush(ti, gt);
      flush(ai, ga);
      flush(bi, gb);
      flush(ci, gc);
      flush(si, gs);
    });
  }
  return y;
}

}  // namespace rrm::ssm
