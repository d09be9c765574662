#pragma once

// Brute-force reference implementations used only by the tests. They share no
// code with the library kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "srfbn/tensor.hpp"

namespace oracle {

using srfbn::Dims4;
using srfbn::Tensor4;

inline Tensor4 random_tensor(Dims4 d, std::uint64_t seed, float lo = -1.f, float hi = 1.f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor4 t(d);
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

/// Random values kept at least `gap` away from zero (keeps kinks out of finite differences).
inline Tensor4 random_away_from_zero(Dims4 d, std::uint64_t seed, float gap = 0.05f) {
  Tensor4 t = random_tensor(d, seed);
  for (auto& v : t.storage()) v = v >= 0 ? v + gap : v - gap;
  return t;
}

/// Direct cross-correlation; weight (c_out, c_in, k, k).
inline std::vector<double> conv2d(const Tensor4& x, const Tensor4& w, const std::vector<float>& bias, int s, int p,
                                  int& oh, int& ow) {
  const int k = w.h();
  oh = (x.h() + 2 * p - k) / s + 1;
  ow = (x.w() + 2 * p - k) / s + 1;
  std::vector<double> y(static_cast<std::size_t>(x.n()) * w.n() * oh * ow, 0.0);
  for (int b = 0; b < x.n(); ++b)
    for (int o = 0; o < w.n(); ++o)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) {
          double acc = bias.empty() ? 0.0 : bias[o];
          for (int c = 0; c < x.c(); ++c)
            for (int i = 0; i < k; ++i)
              for (int j = 0; j < k; ++j) {
                const int iy = yy * s - p + i, ix = xx * s - p + j;
                if (iy >= 0 && iy < x.h() && ix >= 0 && ix < x.w()) acc += double(x(b, c, iy, ix)) * w(o, c, i, j);
              }
          y[((static_cast<std::size_t>(b) * w.n() + o) * oh + yy) * ow + xx] = acc;
        }
  return y;
}

/// Transposed convolution by scattering each input pixel; weight (c_in, c_out, k, k).
inline std::vector<double> deconv2d(const Tensor4& x, const Tensor4& w, const std::vector<float>& bias, int s,
                                    int p, int& oh, int& ow) {
  const int k = w.h(), c_out = w.c();
  oh = (x.h() - 1) * s - 2 * p + k;
  ow = (x.w() - 1) * s - 2 * p + k;
  std::vector<double> y(static_cast<std::size_t>(x.n()) * c_out * oh * ow, 0.0);
  auto at = [&](int b, int o, int yy, int xx) -> double& {
    return y[((static_cast<std::size_t>(b) * c_out + o) * oh + yy) * ow + xx];
  };
  for (int b = 0; b < x.n(); ++b) {
    for (int o = 0; o < c_out; ++o)
      for (int yy = 0; yy < oh; ++yy)
        for (int xx = 0; xx < ow; ++xx) at(b, o, yy, xx) = bias.empty() ? 0.0 : bias[o];
    for (int c = 0; c < x.c(); ++c)
      for (int iy = 0; iy < x.h(); ++iy)
        for (int ix = 0; ix < x.w(); ++ix)
          for (int o = 0; o < c_out; ++o)
            for (int i = 0; i < k; ++i)
              for (int j = 0; j < k; ++j) {
                const int yy = iy * s - p + i, xx = ix * s - p + j;
                if (yy >= 0 && yy < oh && xx >= 0 && xx < ow) at(b, o, yy, xx) += double(x(b, c, iy, ix)) * w(c, o, i, j);
              }
  }
  return y;
}

/// Replicate-padded 2-D Gaussian blur evaluated directly from exp().
inline std::vector<double> gaussian_blur(const Tensor4& img, int k, double sigma) {
  const int r = k / 2;
  double norm = 0.0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) norm += std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  std::vector<double> out(img.size());
  for (int b = 0; b < img.n(); ++b)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < img.h(); ++y)
        for (int x = 0; x < img.w(); ++x) {
          double acc = 0.0;
          for (int i = -r; i <= r; ++i)
            for (int j = -r; j <= r; ++j) {
              const int yy = std::clamp(y + i, 0, img.h() - 1), xx = std::clamp(x + j, 0, img.w() - 1);
              acc += std::exp(-(i * i + j * j) / (2 * sigma * sigma)) / norm * img(b, c, yy, xx);
            }
          out[img.index(b, c, y, x)] = acc;
        }
  return out;
}

inline double keys_cubic(double x) {
  x = std::fabs(x);
  if (x < 1) return (1.5 * x - 2.5) * x * x + 1;
  if (x < 2) return ((-0.5 * x + 2.5) * x - 4) * x + 2;
  return 0;
}

/// Bicubic resampling by direct 2-D kernel summation over every source pixel
/// within reach (plus replicated borders), normalized by the 2-D weight sum.
inline std::vector<double> bicubic(const Tensor4& img, int scale, bool down, int& oh, int& ow) {
  const double f = down ? 1.0 / scale : double(scale);
  oh = down ? img.h() / scale : img.h() * scale;
  ow = down ? img.w() / scale : img.w() * scale;
  const double support = down ? 2.0 * scale : 2.0;
  auto kernel = [&](double d) { return down ? f * keys_cubic(f * d) : keys_cubic(d); };
  std::vector<double> out(static_cast<std::size_t>(img.n()) * img.c() * oh * ow);
  for (int b = 0; b < img.n(); ++b)
    for (int c = 0; c < img.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          const double uy = (y + 0.5) / f - 0.5, ux = (x + 0.5) / f - 0.5;
          double acc = 0, wsum = 0;
          for (int sy = static_cast<int>(std::floor(uy - support)) - 1; sy <= uy + support + 1; ++sy)
            for (int sx = static_cast<int>(std::floor(ux - support)) - 1; sx <= ux + support + 1; ++sx) {
              const double wgt = kernel(uy - sy) * kernel(ux - sx);
              if (wgt == 0) continue;
              acc += wgt * img(b, c, std::clamp(sy, 0, img.h() - 1), std::clamp(sx, 0, img.w() - 1));
              wsum += wgt;
            }
          out[((static_cast<std::size_t>(b) * img.c() + c) * oh + y) * ow + x] = std::clamp(acc / wsum, 0.0, 1.0);
        }
  return out;
}

/// |DFT|^2 of an h x w map by the O(N^4) definition.
inline std::vector<double> dft_power(const std::vector<double>& x, int h, int w) {
  std::vector<double> p(x.size());
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      std::complex<double> acc = 0;
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) {
          const double phase = -2 * std::numbers::pi * (double(ky) * y / h + double(kx) * xx / w);
          acc += x[y * w + xx] * std::complex<double>(std::cos(phase), std::sin(phase));
        }
      p[ky * w + kx] = std::norm(acc);
    }
  return p;
}

/// Annulus means of a power spectrum with radius measured on the centred grid.
inline std::vector<double> radial_profile(const std::vector<double>& power, int h, int w, int bins) {
  std::vector<double> sum(bins, 0.0);
  std::vector<int> cnt(bins, 0);
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      // Centre the spectrum: shifted index minus the centre index.
      const int cy = (ky + h / 2) % h, cx = (kx + w / 2) % w;
      const double fy = double(cy - h / 2) / h, fx = double(cx - w / 2) / w;
      const double r = std::sqrt(fy * fy + fx * fx);
      int b = static_cast<int>(r / 0.5 * bins);
      if (b >= bins) b = bins - 1;
      sum[b] += power[ky * w + kx];
      cnt[b] += 1;
    }
  for (int b = 0; b < bins; ++b) sum[b] = cnt[b] ? sum[b] / cnt[b] : 0.0;
  return sum;
}

struct ScalarAdam {
  double m = 0, v = 0, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  int t = 0;
  double step(double param, double grad, double lr) {
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return param - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle
