#include "rrm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rrm/error.hpp"

namespace rrm {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(x.shape()));
  }
}

// Adds src into the gradient buffer of t if t is differentiable.
template <class Fn>
void accumulate(const ImplPtr& t, Fn&& fn) {
  if (t->requires_grad) fn(t->grad_buffer());
}

template <class Forward, class Derivative>
Tensor unary(const Tensor& x, std::string_view name, Forward f, Derivative df) {
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl();
    ImplPtr yi = y.impl();
    detail::record(name, {x}, y, [xi, yi, df] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i] * df(xi->data[i], yi->data[i]);
      });
    });
  }
  return y;
}

double sigmoid_value(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  double e = std::exp(v);
  return e / (1.0 + e);
}

// Trailing extent of a tensor viewed as [C, S].
std::size_t trailing(const Tensor& x) { return x.numel() / x.dim(0); }

// Output columns ox with 0 <= ox*stride + kx - pad < width, as [lo, hi).
void valid_output_columns(std::size_t kx, std::ptrdiff_t pad, std::size_t stride, std::ptrdiff_t width,
                          std::size_t out_width, std::size_t& lo, std::size_t& hi) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - pad;
  const std::ptrdiff_t first = off >= 0 ? 0 : (-off + s - 1) / s;
  std::ptrdiff_t last = (width - 1 - off) < 0 ? -1 : (width - 1 - off) / s;
  last = std::min<std::ptrdiff_t>(last, static_cast<std::ptrdiff_t>(out_width) - 1);
  lo = static_cast<std::size_t>(first);
  hi = last < first ? lo : static_cast<std::size_t>(last + 1);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor y = make_result(a.shape(), std::move(out));
  if (detail::needs_grad({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), yi = y.impl();
    detail::record("add", {a, b}, y, [ai, bi, yi] {
      for (const ImplPtr& t : {ai, bi}) {
        accumulate(t, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
        });
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor y = make_result(a.shape(), std::move(out));
  if (detail::needs_grad({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), yi = y.impl();
    detail::record("sub", {a, b}, y, [ai, bi, yi] {
      accumulate(ai, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
      });
      accumulate(bi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= yi->grad[i];
      });
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor y = make_result(a.shape(), std::move(out));
  if (detail::needs_grad({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), yi = y.impl();
    detail::record("mul", {a, b}, y, [ai, bi, yi] {
      accumulate(ai, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i] * bi->data[i];
      });
      accumulate(bi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i] * ai->data[i];
      });
    });
  }
  return y;
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, "scale", [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double* brow = &bd[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  FlopCounter::add(m * n * k);
  Tensor y = make_result({m, n}, std::move(out));
  if (detail::needs_grad({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), yi = y.impl();
    detail::record("matmul", {a, b}, y, [ai, bi, yi, m, k, n] {
      const auto& dy = yi->grad;
      accumulate(ai, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += dy[i * n + j] * bi->data[p * n + j];
            g[i * k + p] += acc;
          }
        }
      });
      accumulate(bi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double av = ai->data[i * k + p];
            for (std::size_t j = 0; j < n; ++j) g[p * n + j] += av * dy[i * n + j];
          }
        }
      });
    });
  }
  return y;
}

Tensor mean_over_channels(const Tensor& x) {
  const std::size_t c = x.dim(0), s = trailing(x);
  std::vector<double> out(s, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < s; ++i) out[i] += x[ch * s + i];
  }
  for (double& v : out) v /= static_cast<double>(c);
  Shape shape = x.shape();
  shape[0] = 1;
  Tensor y = make_result(shape, std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("mean_over_channels", {x}, y, [xi, yi, c, s] {
      accumulate(xi, [&](std::vector<double>& g) {
        const double inv = 1.0 / static_cast<double>(c);
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < s; ++i) g[ch * s + i] += yi->grad[i] * inv;
        }
      });
    });
  }
  return y;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  Shape shape = parts[0].shape();
  std::size_t channels = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != shape.size() || !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw DimensionError("concat_channels: " + shape_string(p.shape()) + " vs " + shape_string(shape));
    }
    channels += p.dim(0);
  }
  shape[0] = channels;
  std::vector<double> out;
  out.reserve(shape_numel(shape));
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor y = make_result(shape, std::move(out));
  if (detail::needs_grad(parts)) {
    std::vector<ImplPtr> ins;
    for (const Tensor& p : parts) ins.push_back(p.impl());
    ImplPtr yi = y.impl();
    detail::record("concat_channels", {parts.begin(), parts.end()}, y, [ins, yi] {
      std::size_t offset = 0;
      for (const ImplPtr& t : ins) {
        accumulate(t, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[offset + i];
        });
        offset += t->data.size();
      }
    });
  }
  return y;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat_channels(parts);
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice_channels: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + shape_string(x.shape()));
  }
  const std::size_t s = trailing(x);
  std::vector<double> out(x.data().begin() + begin * s, x.data().begin() + (begin + count) * s);
  Shape shape = x.shape();
  shape[0] = count;
  Tensor y = make_result(shape, std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("slice_channels", {x}, y, [xi, yi, begin, s] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < yi->grad.size(); ++i) g[begin * s + i] += yi->grad[i];
      });
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = x.dim(0), s = trailing(x);
  const bool affine = gamma.defined();
  if (affine && (gamma.numel() != c || !beta.defined() || beta.numel() != c)) {
    throw DimensionError("layer_norm: affine parameters must have " + std::to_string(c) + " entries");
  }
  std::vector<double> xhat(x.numel());
  std::vector<double> inv_std(s);
  const double inv_c = 1.0 / static_cast<double>(c);
  for (std::size_t i = 0; i < s; ++i) {
    double mu = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) mu += x[ch * s + i];
    mu *= inv_c;
    double var = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double d = x[ch * s + i] - mu;
      var += d * d;
    }
    var *= inv_c;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t ch = 0; ch < c; ++ch) xhat[ch * s + i] = (x[ch * s + i] - mu) * inv_std[i];
  }
  std::vector<double> out = xhat;
  if (affine) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t i = 0; i < s; ++i) out[ch * s + i] = xhat[ch * s + i] * gamma[ch] + beta[ch];
    }
  }
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x, &gamma, &beta})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    ImplPtr gi = affine ? gamma.impl() : nullptr;
    ImplPtr bi = affine ? beta.impl() : nullptr;
    std::vector<Tensor> inputs{x};
    if (affine) {
      inputs.push_back(gamma);
      inputs.push_back(beta);
    }
    detail::record("layer_norm", std::move(inputs), y,
                   [xi, yi, gi, bi, c, s, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      const auto& dy = yi->grad;
      if (gi) {
        accumulate(gi, [&](std::vector<double>& g) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t i = 0; i < s; ++i) g[ch] += dy[ch * s + i] * xhat[ch * s + i];
          }
        });
        accumulate(bi, [&](std::vector<double>& g) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            for (std::size_t i = 0; i < s; ++i) g[ch] += dy[ch * s + i];
          }
        });
      }
      accumulate(xi, [&](std::vector<double>& g) {
        const double cn = static_cast<double>(c);
        std::vector<double> gh(c);
        for (std::size_t i = 0; i < s; ++i) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            gh[ch] = dy[ch * s + i] * (gi ? gi->data[ch] : 1.0);
            sum_g += gh[ch];
            sum_gx += gh[ch] * xhat[ch * s + i];
          }
          for (std::size_t ch = 0; ch < c; ++ch) {
            g[ch * s + i] += inv_std[i] / cn * (cn * gh[ch] - sum_g - xhat[ch * s + i] * sum_gx);
          }
        }
      });
    });
  }
  return y;
}

Tensor layer_norm(const Tensor& x, double eps) { return layer_norm(x, Tensor{}, Tensor{}, eps); }

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](double v) { return v * sigmoid_value(v); },
      [](double v, double) {
        const double s = sigmoid_value(v);
        return s * (1.0 + v * (1.0 - s));
      });
}

Tensor gelu(const Tensor& x) {
  return unary(
      x, "gelu", [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v, double) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
        return cdf + v * pdf;
      });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, "softplus", [](double v) { return v > 20.0 ? v : std::log1p(std::exp(v)); },
      [](double v, double) { return sigmoid_value(v); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor global_avg_pool(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool");
  const std::size_t c = x.dim(0), s = trailing(x);
  std::vector<double> out(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < s; ++i) out[ch] += x[ch * s + i];
    out[ch] /= static_cast<double>(s);
  }
  Tensor y = make_result({c}, std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("global_avg_pool", {x}, y, [xi, yi, c, s] {
      accumulate(xi, [&](std::vector<double>& g) {
        const double inv = 1.0 / static_cast<double>(s);
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < s; ++i) g[ch * s + i] += yi->grad[ch] * inv;
        }
      });
    });
  }
  return y;
}

Tensor scale_by_channel(const Tensor& x, const Tensor& s) {
  const std::size_t c = x.dim(0), n = trailing(x);
  if (s.numel() != c) {
    throw DimensionError("scale_by_channel: " + shape_string(s.shape()) + " for " + shape_string(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) out[ch * n + i] = x[ch * n + i] * s[ch];
  }
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x, &s})) {
    ImplPtr xi = x.impl(), si = s.impl(), yi = y.impl();
    detail::record("scale_by_channel", {x, s}, y, [xi, si, yi, c, n] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < n; ++i) g[ch * n + i] += yi->grad[ch * n + i] * si->data[ch];
        }
      });
      accumulate(si, [&](std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < n; ++i) g[ch] += yi->grad[ch * n + i] * xi->data[ch * n + i];
        }
      });
    });
  }
  return y;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  const std::size_t c = x.dim(0), n = trailing(x);
  if (b.numel() != c) {
    throw DimensionError("add_channel_bias: " + shape_string(b.shape()) + " for " + shape_string(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < n; ++i) out[ch * n + i] = x[ch * n + i] + b[ch];
  }
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x, &b})) {
    ImplPtr xi = x.impl(), bi = b.impl(), yi = y.impl();
    detail::record("add_channel_bias", {x, b}, y, [xi, bi, yi, c, n] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
      });
      accumulate(bi, [&](std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < n; ++i) g[ch] += yi->grad[ch * n + i];
        }
      });
    });
  }
  return y;
}

Tensor scale_by_scalar(const Tensor& x, const Tensor& s) {
  if (s.numel() != 1) throw DimensionError("scale_by_scalar: factor must hold one value");
  const double f = s[0];
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * f;
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x, &s})) {
    ImplPtr xi = x.impl(), si = s.impl(), yi = y.impl();
    detail::record("scale_by_scalar", {x, s}, y, [xi, si, yi] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i] * si->data[0];
      });
      accumulate(si, [&](std::vector<double>& g) {
        double acc = 0.0;
        for (std::size_t i = 0; i < yi->grad.size(); ++i) acc += yi->grad[i] * xi->data[i];
        g[0] += acc;
      });
    });
  }
  return y;
}

Tensor pixel_shuffle(const Tensor& x, std::size_t r) {
  require_rank(x, 3, "pixel_shuffle");
  if (r == 0 || x.dim(0) % (r * r) != 0) {
    throw DimensionError("pixel_shuffle: " + std::to_string(x.dim(0)) + " channels not divisible by r^2");
  }
  const std::size_t c = x.dim(0) / (r * r), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h * r, ow = w * r;
  // index map: out position -> in position
  std::vector<std::size_t> src(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) {
        const std::size_t in_ch = ch * r * r + i * r + j;
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t xx = 0; xx < w; ++xx) {
            src[(ch * oh + y * r + i) * ow + xx * r + j] = (in_ch * h + y) * w + xx;
          }
        }
      }
    }
  }
  std::vector<double> out(src.size());
  for (std::size_t k = 0; k < src.size(); ++k) out[k] = x[src[k]];
  Tensor y = make_result({c, oh, ow}, std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("pixel_shuffle", {x}, y, [xi, yi, src = std::move(src)] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t k = 0; k < src.size(); ++k) g[src[k]] += yi->grad[k];
      });
    });
  }
  return y;
}

Tensor strided_downsample(const Tensor& x, std::size_t r) {
  require_rank(x, 3, "strided_downsample");
  if (r == 0) throw DimensionError("strided_downsample: stride must be positive");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = (h + r - 1) / r, ow = (w + r - 1) / r;
  std::vector<double> out(c * oh * ow);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) out[(ch * oh + y) * ow + xx] = x[(ch * h + y * r) * w + xx * r];
    }
  }
  Tensor y = make_result({c, oh, ow}, std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("strided_downsample", {x}, y, [xi, yi, c, h, w, oh, ow, r] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx) g[(ch * h + y * r) * w + xx * r] += yi->grad[(ch * oh + y) * ow + xx];
          }
        }
      });
    });
  }
  return y;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin || weight.dim(3) != k) {
    throw DimensionError("conv2d: weight " + shape_string(weight.shape()) + " for input " +
                         shape_string(x.shape()));
  }
  if (k % 2 == 0) throw ConfigError("conv2d: kernel size must be odd, got " + std::to_string(k));
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  if (bias.defined() && bias.numel() != cout) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " for " + std::to_string(cout) + " outputs");
  }
  if (h + 2 * padding < k || w + 2 * padding < k) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_string(x.shape()));
  }
  const std::size_t oh = (h + 2 * padding - k) / stride + 1;
  const std::size_t ow = (w + 2 * padding - k) / stride + 1;
  const auto xd = x.data();
  const auto wd = weight.data();
  std::vector<double> out(cout * oh * ow, 0.0);
  const auto pad = static_cast<std::ptrdiff_t>(padding);
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);

  auto col_range = [pad, stride, W, ow](std::size_t kx, std::size_t& lo, std::size_t& hi) {
    valid_output_columns(kx, pad, stride, W, ow, lo, hi);
  };

  for (std::size_t co = 0; co < cout; ++co) {
    double* obase = &out[co * oh * ow];
    if (bias.defined()) std::fill(obase, obase + oh * ow, bias[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* xbase = &xd[ci * h * w];
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = wd[((co * cin + ci) * k + ky) * k + kx];
          std::size_t lo = 0, hi = 0;
          col_range(kx, lo, hi);
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
            if (iy < 0 || iy >= H) continue;
            const double* xrow = xbase + iy * W;
            double* orow = obase + oy * ow;
            for (std::size_t ox = lo; ox < hi; ++ox) {
              orow[ox] += wv * xrow[static_cast<std::ptrdiff_t>(ox * stride + kx) - pad];
            }
          }
        }
      }
    }
  }
  FlopCounter::add(cout * oh * ow * cin * k * k);
  Tensor y = make_result({cout, oh, ow}, std::move(out));
  if (detail::needs_grad({&x, &weight, &bias})) {
    ImplPtr xi = x.impl(), wi = weight.impl(), yi = y.impl();
    ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
    std::vector<Tensor> inputs{x, weight};
    if (bi) inputs.push_back(bias);
    detail::record("conv2d", std::move(inputs), y,
                   [=] {
      const auto& dy = yi->grad;
      if (bi) {
        accumulate(bi, [&](std::vector<double>& g) {
          for (std::size_t co = 0; co < cout; ++co) {
            double acc = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc += dy[co * oh * ow + i];
            g[co] += acc;
          }
        });
      }
      const bool want_w = wi->requires_grad, want_x = xi->requires_grad;
      double* gw = want_w ? wi->grad_buffer().data() : nullptr;
      double* gx = want_x ? xi->grad_buffer().data() : nullptr;
      for (std::size_t co = 0; co < cout; ++co) {
        const double* dbase = &dy[co * oh * ow];
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* xbase = &xi->data[ci * h * w];
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t widx = ((co * cin + ci) * k + ky) * k + kx;
              const double wv = wi->data[widx];
              std::size_t lo = 0, hi = 0;
              col_range(kx, lo, hi);
              double acc = 0.0;
              for (std::size_t oy = 0; oy < oh; ++oy) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - pad;
                if (iy < 0 || iy >= H) continue;
                const double* drow = dbase + oy * ow;
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - pad;
                  if (want_w) acc += drow[ox] * xbase[iy * W + ix];
                  if (want_x) gx[(ci * h) * w + iy * W + ix] += drow[ox] * wv;
                }
              }
              if (want_w) gw[widx] += acc;
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride) {
  require_rank(x, 3, "transposed_conv2d");
  require_rank(weight, 4, "transposed_conv2d");
  const std::size_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  if (weight.dim(0) != cin || weight.dim(3) != k) {
    throw DimensionError("transposed_conv2d: weight " + shape_string(weight.shape()) + " for input " +
                         shape_string(x.shape()));
  }
  if (stride == 0) throw ConfigError("transposed_conv2d: stride must be positive");
  if (bias.defined() && bias.numel() != cout) throw DimensionError("transposed_conv2d: bias size");
  const std::size_t oh = (h - 1) * stride + k, ow = (w - 1) * stride + k;
  std::vector<double> out(cout * oh * ow, 0.0);
  if (bias.defined()) {
    for (std::size_t co = 0; co < cout; ++co) std::fill(&out[co * oh * ow], &out[co * oh * ow] + oh * ow, bias[co]);
  }
  const auto xd = x.data();
  const auto wd = weight.data();
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t co = 0; co < cout; ++co) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          const double wv = wd[((ci * cout + co) * k + ky) * k + kx];
          for (std::size_t iy = 0; iy < h; ++iy) {
            double* orow = &out[(co * oh + iy * stride + ky) * ow + kx];
            const double* xrow = &xd[(ci * h + iy) * w];
            for (std::size_t ix = 0; ix < w; ++ix) orow[ix * stride] += wv * xrow[ix];
          }
        }
      }
    }
  }
  FlopCounter::add(cin * cout * h * w * k * k);
  Tensor y = make_result({cout, oh, ow}, std::move(out));
  if (detail::needs_grad({&x, &weight, &bias})) {
    ImplPtr xi = x.impl(), wi = weight.impl(), yi = y.impl();
    ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
    std::vector<Tensor> inputs{x, weight};
    if (bi) inputs.push_back(bias);
    detail::record("transposed_conv2d", std::move(inputs), y, [=] {
      const auto& dy = yi->grad;
      if (bi) {
        accumulate(bi, [&](std::vector<double>& g) {
          for (std::size_t co = 0; co < cout; ++co) {
            double acc = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) acc += dy[co * oh * ow + i];
            g[co] += acc;
          }
        });
      }
      const bool want_w = wi->requires_grad, want_x = xi->requires_grad;
      double* gw = want_w ? wi->grad_buffer().data() : nullptr;
      double* gx = want_x ? xi->grad_buffer().data() : nullptr;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        for (std::size_t co = 0; co < cout; ++co) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t widx = ((ci * cout + co) * k + ky) * k + kx;
              const double wv = wi->data[widx];
              double acc = 0.0;
              for (std::size_t iy = 0; iy < h; ++iy) {
                const double* drow = &dy[(co * oh + iy * stride + ky) * ow + kx];
                const std::size_t xrow = (ci * h + iy) * w;
                for (std::size_t ix = 0; ix < w; ++ix) {
                  if (want_w) acc += drow[ix * stride] * xi->data[xrow + ix];
                  if (want_x) gx[xrow + ix] += drow[ix * stride] * wv;
                }
              }
              if (want_w) gw[widx] += acc;
            }
          }
        }
      }
    });
  }
  return y;
}

namespace {

void check_order(const Tensor& x, std::span<const std::size_t> order, const char* op) {
  require_rank(x, 2, op);
  if (order.size() != x.dim(1)) {
    throw DimensionError(std::string(op) + ": order of length " + std::to_string(order.size()) +
                         " for sequence " + shape_string(x.shape()));
  }
}

}  // namespace

Tensor gather_permute(const Tensor& x, std::span<const std::size_t> order) {
  check_order(x, order, "gather_permute");
  const std::size_t c = x.dim(0), l = x.dim(1);
  std::vector<double> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t k = 0; k < l; ++k) out[ch * l + k] = x[ch * l + order[k]];
  }
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    std::vector<std::size_t> ord(order.begin(), order.end());
    detail::record("gather_permute", {x}, y, [xi, yi, c, l, ord = std::move(ord)] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t k = 0; k < l; ++k) g[ch * l + ord[k]] += yi->grad[ch * l + k];
        }
      });
    });
  }
  return y;
}

Tensor scatter_inverse(const Tensor& x, std::span<const std::size_t> order) {
  check_order(x, order, "scatter_inverse");
  const std::size_t c = x.dim(0), l = x.dim(1);
  std::vector<double> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t k = 0; k < l; ++k) out[ch * l + order[k]] = x[ch * l + k];
  }
  Tensor y = make_result(x.shape(), std::move(out));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    std::vector<std::size_t> ord(order.begin(), order.end());
    detail::record("scatter_inverse", {x}, y, [xi, yi, c, l, ord = std::move(ord)] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t k = 0; k < l; ++k) g[ch * l + k] += yi->grad[ch * l + ord[k]];
        }
      });
    });
  }
  return y;
}

namespace {

// Balanced pairwise sum of parts[lo, hi) at element i.
double pairwise(std::span<const Tensor> parts, std::size_t lo, std::size_t hi, std::size_t i) {
  if (hi - lo == 1) return parts[lo][i];
  const std::size_t mid = lo + (hi - lo) / 2;
  return pairwise(parts, lo, mid, i) + pairwise(parts, mid, hi, i);
}

}  // namespace

Tensor sum_list(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("sum_list: no inputs");
  for (const Tensor& p : parts) require_same_shape(p, parts[0], "sum_list");
  std::vector<double> out(parts[0].numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = pairwise(parts, 0, parts.size(), i);
  Tensor y = make_result(parts[0].shape(), std::move(out));
  if (detail::needs_grad(parts)) {
    std::vector<ImplPtr> ins;
    for (const Tensor& p : parts) ins.push_back(p.impl());
    ImplPtr yi = y.impl();
    detail::record("sum_list", {parts.begin(), parts.end()}, y, [ins, yi] {
      for (const ImplPtr& t : ins) {
        accumulate(t, [&](std::vector<double>& g) {
          for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
        });
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Tensor y = make_result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("reshape", {x}, y, [xi, yi] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += yi->grad[i];
      });
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor y = make_result({1}, {acc});
  if (detail::needs_grad({&x})) {
    ImplPtr xi = x.impl(), yi = y.impl();
    detail::record("sum", {x}, y, [xi, yi] {
      accumulate(xi, [&](std::vector<double>& g) {
        for (double& v : g) v += yi->grad[0];
      });
    });
  }
  return y;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_abs_diff");
  const double n = static_cast<double>(a.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(a[i] - b[i]);
  Tensor y = make_result({1}, {acc / n});
  if (detail::needs_grad({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), yi = y.impl();
    detail::record("mean_abs_diff", {a, b}, y, [ai, bi, yi, n] {
      const double scale_factor = yi->grad[0] / n;
      auto sign = [&](std::size_t i) {
        const double d = ai->data[i] - bi->data[i];
        return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      };
      accumulate(ai, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale_factor * sign(i);
      });
      accumulate(bi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= scale_factor * sign(i);
      });
    });
  }
  return y;
}

Tensor mean_sq_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mean_sq_diff");
  const double n = static_cast<double>(a.numel());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  Tensor y = make_result({1}, {acc / n});
  if (detail::needs_grad({&a, &b})) {
    ImplPtr ai = a.impl(), bi = b.impl(), yi = y.impl();
    detail::record("mean_sq_diff", {a, b}, y, [ai, bi, yi, n] {
      const double f = 2.0 * yi->grad[0] / n;
      accumulate(ai, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += f * (ai->data[i] - bi->data[i]);
      });
      accumulate(bi, [&](std::vector<double>& g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= f * (ai->data[i] - bi->data[i]);
      });
    });
  }
  return y;
}

}  // namespace rrm
