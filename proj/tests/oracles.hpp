#pragma once

// Independent reference implementations used as test oracles. They are
// written as plain loops and share no code with the library.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// Cross-correlation with zero padding; x [ci, h, w], w [co, ci, k, k].
inline std::vector<double> conv2d(const std::vector<double>& x, std::size_t ci, std::size_t h, std::size_t w,
                                  const std::vector<double>& weight, const std::vector<double>& bias,
                                  std::size_t co, std::size_t k, std::size_t stride, std::size_t pad,
                                  std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> out(co * oh * ow, 0.0);
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = bias[o];
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
              const long r = static_cast<long>(i * stride + a) - static_cast<long>(pad);
              const long s = static_cast<long>(j * stride + b) - static_cast<long>(pad);
              if (r < 0 || s < 0 || r >= static_cast<long>(h) || s >= static_cast<long>(w)) continue;
              acc += x[(c * h + r) * w + s] * weight[((o * ci + c) * k + a) * k + b];
            }
        out[(o * oh + i) * ow + j] = acc;
      }
  return out;
}

// h_k = a_k h_{k-1} + b_k x_k, y_k = c_k h_k + d x_k for a scalar state.
inline std::vector<double> scalar_recurrence(const std::vector<double>& x, double a, double b, double c, double d) {
  std::vector<double> y;
  double h = 0.0;
  for (double v : x) {
    h = a * h + b * v;
    y.push_back(c * h + d * v);
  }
  return y;
}

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double psnr(const std::vector<double>& a, const std::vector<double>& b) {
  return 10.0 * std::log10(1.0 / mse(a, b));
}

inline double chebyshev(std::size_t p, std::size_t q, std::size_t width) {
  const double dr = std::fabs(static_cast<double>(p / width) - static_cast<double>(q / width));
  const double dc = std::fabs(static_cast<double>(p % width) - static_cast<double>(q % width));
  return std::max(dr, dc);
}

}  // namespace oracle
