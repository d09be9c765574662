#pragma once

// Deterministic synthetic RGB test images: smooth colour ramps, soft-edged
// discs and oriented stripes, so tests need no external datasets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "srfbn/tensor.hpp"

namespace srfbn {

inline Tensor4 synthetic_image(int h, int w, std::uint64_t seed, int channels = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor4 img(1, channels, h, w);
  double base[3], gx[3], gy[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.3 + 0.4 * u(rng);
    gx[c] = 0.3 * (u(rng) - 0.5);
    gy[c] = 0.3 * (u(rng) - 0.5);
  }
  struct Disc { double cy, cx, r, soft, col[3]; };
  Disc discs[4];
  for (auto& d : discs) {
    d.cy = u(rng) * h;
    d.cx = u(rng) * w;
    d.r = (0.1 + 0.25 * u(rng)) * std::min(h, w);
    d.soft = 0.5 + 1.5 * u(rng);
    for (double& v : d.col) v = u(rng) - 0.5;
  }
  const double theta = u(rng) * std::numbers::pi;
  const double period = 4.0 + 8.0 * u(rng);
  const double amp = 0.08 + 0.08 * u(rng);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double ny = static_cast<double>(y) / h - 0.5, nx = static_cast<double>(x) / w - 0.5;
      const double stripe =
          amp * std::sin(2 * std::numbers::pi * (x * std::cos(theta) + y * std::sin(theta)) / period);
      for (int c = 0; c < channels; ++c) {
        const int cc = channels == 3 ? c : 1;
        double v = base[cc] + gx[cc] * nx * 2 + gy[cc] * ny * 2 + stripe;
        for (const auto& d : discs) {
          const double dist = std::hypot(y - d.cy, x - d.cx);
          v += 0.5 * d.col[cc] / (1.0 + std::exp((dist - d.r) / d.soft));
        }
        img(0, c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  return img;
}

}  // namespace srfbn
