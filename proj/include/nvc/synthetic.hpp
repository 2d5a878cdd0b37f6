#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nvc/image.hpp"
#include "nvc/rng.hpp"

namespace nvc {

// Procedural RGB test scenes: a smooth two-color gradient background, a
// handful of soft-edged ellipses and rectangles, and low-amplitude value
// noise. Deterministic in (width, height, seed), so corpora regenerate
// identically anywhere without shipping binary fixtures.

inline ImageU8 synthetic_image(std::int64_t width, std::int64_t height, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  auto color = [&]() {
    return std::array<double, 3>{unit_double(g), unit_double(g), unit_double(g)};
  };

  const auto bg_a = color();
  const auto bg_b = color();
  const double gx = unit_double(g) * 2.0 - 1.0;
  const double gy = unit_double(g) * 2.0 - 1.0;
  const double gnorm = std::max(std::abs(gx) + std::abs(gy), 1e-6);

  std::vector<std::array<double, 7>> blobs;  // cx, cy, rx, ry, r, g, b
  const int n_blobs = 3 + static_cast<int>(uniform_index(g, 6));
  for (int i = 0; i < n_blobs; ++i) {
    auto c = color();
    blobs.push_back({unit_double(g) * width, unit_double(g) * height,
                     (0.05 + 0.2 * unit_double(g)) * width,
                     (0.05 + 0.2 * unit_double(g)) * height, c[0], c[1], c[2]});
  }
  const bool rects = uniform_index(g, 2) == 0;
  const double noise_amp = 0.01 + 0.03 * unit_double(g);

  ImageU8 img;
  img.width = width;
  img.height = height;
  img.rgb.resize(static_cast<std::size_t>(width * height * 3));

  std::mt19937_64 ng(derive_seed(seed, 1));
  for (std::int64_t y = 0; y < height; ++y)
    for (std::int64_t x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * (gx * (2.0 * x / width - 1.0) + gy * (2.0 * y / height - 1.0)) / gnorm;
      std::array<double, 3> px;
      for (int c = 0; c < 3; ++c) px[c] = bg_a[c] * (1.0 - t) + bg_b[c] * t;
      for (const auto& b : blobs) {
        const double dx = (x - b[0]) / b[2];
        const double dy = (y - b[1]) / b[3];
        const double d = rects ? std::max(std::abs(dx), std::abs(dy))
                               : std::sqrt(dx * dx + dy * dy);
        const double w = 1.0 / (1.0 + std::exp((d - 1.0) * 12.0));  // soft edge
        for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - w) + b[4 + c] * w;
      }
      const double noise = (unit_double(ng) - 0.5) * 2.0 * noise_amp;
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(px[c] + noise, 0.0, 1.0);
        img.rgb[static_cast<std::size_t>((y * width + x) * 3 + c)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  return img;
}

inline std::vector<ImageU8> synthetic_corpus(std::size_t count, std::int64_t width,
                                             std::int64_t height, std::uint64_t seed) {
  std::vector<ImageU8> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(synthetic_image(width, height, derive_seed(seed, 100 + i)));
  return out;
}

}  // namespace nvc
