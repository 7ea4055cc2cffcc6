#include "rrm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rrm/error.hpp"

namespace rrm {

namespace {

void check_pair(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes differ, " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  if (a.numel() == 0) throw DimensionError(std::string(what) + ": empty input");
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> w(size);
  const double center = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - center;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double max_val) {
  check_pair(a, b, "psnr");
  if (!(max_val > 0.0)) throw ConfigError("psnr: max_val must be positive");
  const auto x = a.data();
  const auto y = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(x.size());
  return 10.0 * std::log10(max_val * max_val / mse);
}

double ssim(const Tensor& a, const Tensor& b, double max_val) {
  check_pair(a, b, "ssim");
  if (a.rank() != 3) throw DimensionError("ssim expects [C, H, W], got " + shape_string(a.shape()));
  constexpr std::size_t kWindow = 11;
  constexpr double kSigma = 1.5;
  const double c1 = (0.01 * max_val) * (0.01 * max_val);
  const double c2 = (0.03 * max_val) * (0.03 * max_val);

  const std::size_t ch = a.dim(0), h = a.dim(1), w = a.dim(2);
  const std::size_t wy = std::min(kWindow, h), wx = std::min(kWindow, w);
  const std::vector<double> gy = gaussian_window(wy, kSigma);
  const std::vector<double> gx = gaussian_window(wx, kSigma);
  const std::size_t oh = h - wy + 1, ow = w - wx + 1;

  const auto x = a.data();
  const auto y = b.data();
  double total = 0.0;
  for (std::size_t c = 0; c < ch; ++c) {
    const double* px = x.data() + c * h * w;
    const double* py = y.data() + c * h * w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (std::size_t u = 0; u < wy; ++u) {
          for (std::size_t v = 0; v < wx; ++v) {
            const double g = gy[u] * gx[v];
            const double vx = px[(i + u) * w + j + v];
            const double vy = py[(i + u) * w + j + v];
            mx += g * vx;
            my += g * vy;
            sxx += g * vx * vx;
            syy += g * vy * vy;
            sxy += g * vx * vy;
          }
        }
        const double var_x = sxx - mx * mx;
        const double var_y = syy - my * my;
        const double cov = sxy - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (var_x + var_y + c2));
      }
    }
  }
  return total / static_cast<double>(ch * oh * ow);
}

}  // namespace rrm
