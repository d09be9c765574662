#pragma once

// Luminance PSNR/SSIM and per-iteration evaluation reports.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "srfbn/degradation.hpp"
#include "srfbn/error.hpp"
#include "srfbn/image_io.hpp"
#include "srfbn/model.hpp"
#include "srfbn/ops.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

/// BT.601 studio-swing luma of an RGB image in [0, 1], returned in [0, 1].
inline Tensor4 rgb_to_y(const Tensor4& img) {
  detail::require<ShapeError>(img.c() == 3, "rgb_to_y: expected 3 channels, got " + img.dims().str());
  Tensor4 y(Dims4{img.n(), 1, img.h(), img.w()});
  const std::size_t hw = img.dims().plane();
  for (int b = 0; b < img.n(); ++b) {
    const float* r = img.plane(b, 0);
    const float* g = img.plane(b, 1);
    const float* bl = img.plane(b, 2);
    float* dst = y.plane(b, 0);
    for (std::size_t i = 0; i < hw; ++i) {
      const double y255 = 65.481 * r[i] + 128.553 * g[i] + 24.966 * bl[i] + 16.0;
      dst[i] = static_cast<float>(y255 / 255.0);
    }
  }
  return y;
}

/// Y channel of an RGB image, or the image itself when it is already single-channel.
inline Tensor4 luma(const Tensor4& img) { return img.c() == 1 ? img : rgb_to_y(img); }

inline Tensor4 crop_border(const Tensor4& img, int border) {
  detail::require<ShapeError>(border >= 0 && 2 * border < std::min(img.h(), img.w()),
                              "border crop " + std::to_string(border) + " too large for " + img.dims().str());
  if (border == 0) return img;
  return crop(img, border, border, img.h() - 2 * border, img.w() - 2 * border);
}

/// Returned by psnr for identical inputs.
inline constexpr double kIdenticalPsnr = std::numeric_limits<double>::infinity();

/// PSNR in dB for data in [0, 1] after cropping `border_crop` pixels per edge.
inline double psnr(const Tensor4& a, const Tensor4& b, int border_crop = 0) {
  detail::require<ShapeError>(a.dims() == b.dims(), "psnr: dims " + a.dims().str() + " vs " + b.dims().str());
  const Tensor4 ca = crop_border(a, border_crop);
  const Tensor4 cb = crop_border(b, border_crop);
  double se = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const double d = static_cast<double>(ca[i]) - cb[i];
    se += d * d;
  }
  if (se == 0.0) return kIdenticalPsnr;
  const double mse = se / static_cast<double>(ca.size());
  return 10.0 * std::log10(1.0 / mse);
}

/// Mean SSIM of two single-channel images, 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 1. Only fully covered windows count.
inline double ssim(const Tensor4& a, const Tensor4& b) {
  detail::require<ShapeError>(a.dims() == b.dims(), "ssim: dims " + a.dims().str() + " vs " + b.dims().str());
  detail::require<ShapeError>(a.n() == 1 && a.c() == 1, "ssim: expected a single-channel image");
  constexpr int kWin = 11;
  detail::require<ShapeError>(a.h() >= kWin && a.w() >= kWin, "ssim: image smaller than the 11x11 window");
  const auto window = gaussian_kernel(kWin, 1.5);
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int oh = a.h() - kWin + 1, ow = a.w() - kWin + 1;
  double total = 0.0;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double w = window[i * kWin + j];
          const double va = a(0, 0, y + i, x + j), vb = b(0, 0, y + i, x + j);
          mx += w * va;
          my += w * vb;
          sxx += w * va * va;
          syy += w * vb * vb;
          sxy += w * va * vb;
        }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / (static_cast<double>(oh) * ow);
}

struct ImageMetrics {
  std::string name;
  std::vector<double> psnr;  // one per iteration
  std::vector<double> ssim;
};

struct EvalReport {
  int iterations = 0;
  std::vector<ImageMetrics> images;

  double mean_psnr(int t) const { return mean(t, &ImageMetrics::psnr); }
  double mean_ssim(int t) const { return mean(t, &ImageMetrics::ssim); }

  /// One row per image per iteration.
  std::string to_csv() const {
    std::ostringstream os;
    os << "image,iteration,psnr,ssim\n" << std::setprecision(10);
    for (const auto& im : images)
      for (int t = 0; t < iterations; ++t)
        os << im.name << ',' << t + 1 << ',' << im.psnr[t] << ',' << im.ssim[t] << '\n';
    return os.str();
  }

  std::string summary() const {
    std::ostringstream os;
    os << "images: " << images.size() << "\n" << std::fixed;
    for (int t = 0; t < iterations; ++t)
      os << "iteration " << t + 1 << ": mean PSNR " << std::setprecision(4) << mean_psnr(t)
         << " dB, mean SSIM " << std::setprecision(5) << mean_ssim(t) << "\n";
    return os.str();
  }

 private:
  double mean(int t, std::vector<double> ImageMetrics::*field) const {
    detail::require<ConfigError>(t >= 0 && t < iterations && !images.empty(), "EvalReport: bad iteration");
    double s = 0.0;
    for (const auto& im : images) s += (im.*field)[t];
    return s / static_cast<double>(images.size());
  }
};

namespace detail {
inline Tensor4 clamped(Tensor4 t) {
  clamp01(t);
  return t;
}

inline void score(ImageMetrics& m, const Tensor4& sr, const Tensor4& hr_y, int border) {
  const Tensor4 sr_y = crop_border(luma(clamped(sr)), border);
  m.psnr.push_back(psnr(sr_y, hr_y, 0));
  m.ssim.push_back(ssim(sr_y, hr_y));
}
}  // namespace detail

/// Degrades each HR image (seed + index), runs the network and scores every iteration.
inline EvalReport evaluate(const WeightSet& weights, const ModelConfig& cfg, const std::vector<NamedImage>& dataset,
                           const DegradationSpec& spec, int border_crop, std::uint64_t seed = 0) {
  detail::require<ConfigError>(!dataset.empty(), "evaluate: empty dataset");
  detail::require<ConfigError>(spec.scale == cfg.scale, "evaluate: degradation scale differs from model scale");
  EvalReport report;
  report.iterations = cfg.T;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Tensor4& hr = dataset[i].image;
    const Tensor4 lr = degrade(hr, spec, seed + i);
    const auto trace = forward_unrolled(lr, weights, cfg);
    const Tensor4 hr_y = crop_border(luma(hr), border_crop);
    ImageMetrics m{dataset[i].name, {}, {}};
    for (const auto& it : trace.iterations) detail::score(m, it.sr, hr_y, border_crop);
    report.images.push_back(std::move(m));
  }
  return report;
}

enum class Upsampler { Bicubic, Bilinear };

/// Single-iteration report for a fixed interpolation baseline.
inline EvalReport evaluate_baseline(const std::vector<NamedImage>& dataset, const DegradationSpec& spec,
                                    int border_crop, Upsampler method, std::uint64_t seed = 0) {
  detail::require<ConfigError>(!dataset.empty(), "evaluate_baseline: empty dataset");
  EvalReport report;
  report.iterations = 1;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Tensor4& hr = dataset[i].image;
    const Tensor4 lr = degrade(hr, spec, seed + i);
    const Tensor4 up = method == Upsampler::Bicubic ? bicubic_resize(lr, spec.scale, ResizeDirection::Up)
                                                    : bilinear_upsample(lr, spec.scale);
    ImageMetrics m{dataset[i].name, {}, {}};
    detail::score(m, up, crop_border(luma(hr), border_crop), border_crop);
    report.images.push_back(std::move(m));
  }
  return report;
}

}  // namespace srfbn
