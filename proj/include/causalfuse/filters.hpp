#pragma once

// Plain-array 2D filtering shared by the metrics, the scene descriptor and
// the differentiable blur used inside the training loss.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "causalfuse/error.hpp"

namespace causalfuse::filters {

enum class Border { zero, replicate, reflect };

/// Normalized 1D Gaussian taps of length 2*radius+1.
inline std::vector<double> gaussian_taps(std::size_t radius, double sigma) {
  std::vector<double> taps(2 * radius + 1);
  double total = 0.0;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double offset = static_cast<double>(i) - static_cast<double>(radius);
    taps[i] = std::exp(-(offset * offset) / (2.0 * sigma * sigma));
    total += taps[i];
  }
  for (double& t : taps) t /= total;
  return taps;
}

inline std::vector<double> box_taps(std::size_t length) {
  return std::vector<double>(length, 1.0 / static_cast<double>(length));
}

namespace detail {

// Maps an out-of-range coordinate onto the grid; returns -1 for zero padding.
inline long resolve(long i, long n, Border border) {
  if (i >= 0 && i < n) return i;
  switch (border) {
    case Border::zero:
      return -1;
    case Border::replicate:
      return i < 0 ? 0 : n - 1;
    case Border::reflect: {
      // half-sample symmetric: ... 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
      if (n == 1) return 0;
      const long period = 2 * n;
      long m = i % period;
      if (m < 0) m += period;
      return m < n ? m : period - 1 - m;
    }
  }
  return -1;
}

}  // namespace detail

/// Same-size separable correlation: taps along rows, then along columns.
inline std::vector<double> separable_same(std::span<const double> src, std::size_t height,
                                          std::size_t width, std::span<const double> taps,
                                          Border border) {
  if (src.size() != height * width) throw DimensionError("separable_same: buffer does not match H*W");
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  const long r = static_cast<long>(taps.size() / 2);
  std::vector<double> tmp(src.size(), 0.0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long t = -r; t <= r; ++t) {
        const long xi = detail::resolve(x + t, w, border);
        if (xi >= 0) acc += taps[static_cast<std::size_t>(t + r)] * src[static_cast<std::size_t>(y * w + xi)];
      }
      tmp[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  std::vector<double> out(src.size(), 0.0);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long t = -r; t <= r; ++t) {
        const long yi = detail::resolve(y + t, h, border);
        if (yi >= 0) acc += taps[static_cast<std::size_t>(t + r)] * tmp[static_cast<std::size_t>(yi * w + x)];
      }
      out[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  return out;
}

/// Separable correlation over fully-contained windows only.
/// Output is (H-k+1) x (W-k+1).
inline std::vector<double> separable_valid(std::span<const double> src, std::size_t height,
                                           std::size_t width, std::span<const double> taps) {
  const std::size_t k = taps.size();
  if (src.size() != height * width) throw DimensionError("separable_valid: buffer does not match H*W");
  if (height < k || width < k) throw DimensionError("separable_valid: image smaller than window");
  const std::size_t oh = height - k + 1;
  const std::size_t ow = width - k + 1;
  std::vector<double> tmp(height * ow, 0.0);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * src[y * width + x + t];
      tmp[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * tmp[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

/// Weight mass each pixel receives under zero padding; 1 away from borders.
inline std::vector<double> coverage(std::size_t height, std::size_t width, std::span<const double> taps) {
  const std::vector<double> ones(height * width, 1.0);
  return separable_same(ones, height, width, taps, Border::zero);
}

struct Gradients {
  std::vector<double> gx;
  std::vector<double> gy;
};

/// 3x3 Sobel responses. gx responds to left-to-right increase, gy to
/// top-to-bottom increase.
inline Gradients sobel(std::span<const double> src, std::size_t height, std::size_t width,
                       Border border) {
  if (src.size() != height * width) throw DimensionError("sobel: buffer does not match H*W");
  const long h = static_cast<long>(height);
  const long w = static_cast<long>(width);
  auto px = [&](long y, long x) {
    const long yi = detail::resolve(y, h, border);
    const long xi = detail::resolve(x, w, border);
    return (yi < 0 || xi < 0) ? 0.0 : src[static_cast<std::size_t>(yi * w + xi)];
  };
  Gradients g{std::vector<double>(src.size()), std::vector<double>(src.size())};
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      const double gx = (px(y - 1, x + 1) + 2.0 * px(y, x + 1) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y, x - 1) + px(y + 1, x - 1));
      const double gy = (px(y + 1, x - 1) + 2.0 * px(y + 1, x) + px(y + 1, x + 1)) -
                        (px(y - 1, x - 1) + 2.0 * px(y - 1, x) + px(y - 1, x + 1));
      g.gx[static_cast<std::size_t>(y * w + x)] = gx;
      g.gy[static_cast<std::size_t>(y * w + x)] = gy;
    }
  return g;
}

}  // namespace causalfuse::filters
