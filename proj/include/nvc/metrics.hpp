#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "nvc/tensor.hpp"

namespace nvc {

// Fidelity metrics over C x H x W (or N x C x H x W with N == 1) tensors
// holding pixels in [0, 1]. Pure functions, safe to call from any thread.

namespace detail {
template <typename T>
inline void check_pair(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw shape_error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
}
}  // namespace detail

template <typename T>
double mse(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_pair(a, b, "mse");
  double acc = 0;
  const auto& av = a.data();
  const auto& bv = b.data();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(av.size());
}

/// 20 log10(range / sqrt(MSE)); +infinity for identical images.
inline double psnr_from_mse(double mse_value, double dynamic_range = 1.0) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(dynamic_range / std::sqrt(mse_value));
}

template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double dynamic_range = 1.0) {
  detail::check_pair(a, b, "psnr");
  return psnr_from_mse(mse(a, b), dynamic_range);
}

inline constexpr int kSsimWindow = 8;
inline constexpr int kSsimStride = 4;

/// Mean local structural similarity over 8x8 uniform windows with stride 4,
/// computed per channel and averaged. c1 = (0.01 L)^2, c2 = (0.03 L)^2.
/// Images must be at least one window wide and tall.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b, double dynamic_range = 1.0) {
  detail::check_pair(a, b, "ssim");
  const Shape& s = a.shape();
  std::int64_t C, H, W;
  if (s.size() == 3) {
    C = s[0];
    H = s[1];
    W = s[2];
  } else if (s.size() == 4 && s[0] == 1) {
    C = s[1];
    H = s[2];
    W = s[3];
  } else {
    throw shape_error("ssim: expected CxHxW or 1xCxHxW, got " + shape_str(s));
  }
  if (H < kSsimWindow || W < kSsimWindow)
    throw shape_error("ssim: image " + std::to_string(H) + "x" + std::to_string(W) +
                      " is smaller than the " + std::to_string(kSsimWindow) + "x" +
                      std::to_string(kSsimWindow) + " window");

  const double c1 = 0.01 * dynamic_range * 0.01 * dynamic_range;
  const double c2 = 0.03 * dynamic_range * 0.03 * dynamic_range;
  const double n = kSsimWindow * kSsimWindow;

  double total = 0;
  std::int64_t windows = 0;
  for (std::int64_t c = 0; c < C; ++c) {
    const T* pa = a.data().data() + c * H * W;
    const T* pb = b.data().data() + c * H * W;
    for (std::int64_t y = 0; y + kSsimWindow <= H; y += kSsimStride)
      for (std::int64_t x = 0; x + kSsimWindow <= W; x += kSsimStride) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < kSsimWindow; ++i)
          for (int j = 0; j < kSsimWindow; ++j) {
            const double va = pa[(y + i) * W + (x + j)];
            const double vb = pb[(y + i) * W + (x + j)];
            sx += va;
            sy += vb;
            sxx += va * va;
            syy += vb * vb;
            sxy += va * vb;
          }
        const double mx = sx / n, my = sy / n;
        const double vx = sxx / n - mx * mx;
        const double vy = syy / n - my * my;
        const double cov = sxy / n - mx * my;
        total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++windows;
      }
  }
  return total / static_cast<double>(windows);
}

/// Bits per pixel of a coded representation over the true (pre-padding)
/// image extents. Callers pass the full bit count they want accounted
/// (header + payload for files).
inline double bits_per_pixel(std::uint64_t total_bits, std::int64_t width,
                             std::int64_t height) {
  if (width < 1 || height < 1) throw error("bits_per_pixel: extents must be positive");
  return static_cast<double>(total_bits) / (static_cast<double>(width) * height);
}

}  // namespace nvc
