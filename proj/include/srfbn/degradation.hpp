#pragma once

// LR image synthesis: bicubic (BI), blur + bicubic (BD), bicubic + noise (DN),
// plus aligned LR/HR patch sampling with dihedral augmentation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "srfbn/dihedral.hpp"
#include "srfbn/error.hpp"
#include "srfbn/image_io.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

enum class DegradationKind { BI, BD, DN };

inline std::string to_string(DegradationKind k) {
  switch (k) {
    case DegradationKind::BI: return "bi";
    case DegradationKind::BD: return "bd";
    case DegradationKind::DN: return "dn";
  }
  return "?";
}

inline DegradationKind parse_degradation(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), ::tolower);
  if (s == "bi") return DegradationKind::BI;
  if (s == "bd") return DegradationKind::BD;
  if (s == "dn") return DegradationKind::DN;
  throw ConfigError("unknown degradation model '" + s + "' (expected bi, bd or dn)");
}

struct DegradationSpec {
  DegradationKind kind = DegradationKind::BI;
  int scale = 4;
  int blur_kernel_size = 7;
  double blur_sigma = 1.6;
  double noise_sigma = 30.0;  // on the 8-bit scale

  void validate() const {
    detail::require<ConfigError>(scale == 2 || scale == 3 || scale == 4, "scale must be 2, 3 or 4");
  }
};

enum class ResizeDirection { Down, Up };

namespace detail {

/// Keys cubic convolution kernel with a = -0.5.
inline double cubic(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax, ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax <= 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

struct ResampleTaps {
  int taps = 0;
  std::vector<int> index;      // out_len * taps, clamped source indices
  std::vector<double> weight;  // out_len * taps, normalized per output
};

/// 1-D resampling weights. Downsampling stretches the kernel by the scale
/// factor so it also acts as an anti-aliasing filter.
inline ResampleTaps resample_taps(int in_len, int out_len, int scale, ResizeDirection dir) {
  const bool down = dir == ResizeDirection::Down;
  const double factor = down ? 1.0 / scale : static_cast<double>(scale);
  const double width = down ? 4.0 * scale : 4.0;
  ResampleTaps r;
  r.taps = static_cast<int>(std::ceil(width)) + 2;
  r.index.resize(static_cast<std::size_t>(out_len) * r.taps);
  r.weight.resize(r.index.size());
  for (int o = 0; o < out_len; ++o) {
    const double u = (o + 0.5) / factor - 0.5;
    const int left = static_cast<int>(std::floor(u - width / 2.0));
    double sum = 0.0;
    for (int j = 0; j < r.taps; ++j) {
      const int src = left + j;
      const double wgt = down ? factor * cubic(factor * (u - src)) : cubic(u - src);
      r.index[o * r.taps + j] = std::clamp(src, 0, in_len - 1);
      r.weight[o * r.taps + j] = wgt;
      sum += wgt;
    }
    for (int j = 0; j < r.taps; ++j) r.weight[o * r.taps + j] /= sum;
  }
  return r;
}

/// Applies 1-D taps along rows (vertical pass) then columns, in double.
inline Tensor4 separable_apply(const Tensor4& img, const ResampleTaps& ty, int out_h, const ResampleTaps& tx,
                               int out_w) {
  Tensor4 out(Dims4{img.n(), img.c(), out_h, out_w});
  std::vector<double> tmp(static_cast<std::size_t>(out_h) * img.w());
  for (int b = 0; b < img.n(); ++b)
    for (int c = 0; c < img.c(); ++c) {
      const float* src = img.plane(b, c);
      for (int oy = 0; oy < out_h; ++oy)
        for (int x = 0; x < img.w(); ++x) {
          double acc = 0.0;
          for (int j = 0; j < ty.taps; ++j)
            acc += ty.weight[oy * ty.taps + j] *
                   src[static_cast<std::size_t>(ty.index[oy * ty.taps + j]) * img.w() + x];
          tmp[static_cast<std::size_t>(oy) * img.w() + x] = acc;
        }
      float* dst = out.plane(b, c);
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          double acc = 0.0;
          for (int j = 0; j < tx.taps; ++j)
            acc += tx.weight[ox * tx.taps + j] *
                   tmp[static_cast<std::size_t>(oy) * img.w() + tx.index[ox * tx.taps + j]];
          dst[static_cast<std::size_t>(oy) * out_w + ox] = static_cast<float>(acc);
        }
    }
  return out;
}

inline void clamp01(Tensor4& t) {
  for (auto& v : t.storage()) v = std::clamp(v, 0.0f, 1.0f);
}

}  // namespace detail

/// Bicubic resize by an integer factor; output is clamped to [0, 1].
inline Tensor4 bicubic_resize(const Tensor4& img, int scale, ResizeDirection dir) {
  detail::require<ConfigError>(scale == 2 || scale == 3 || scale == 4,
                               "bicubic_resize: scale must be 2, 3 or 4");
  int out_h, out_w;
  if (dir == ResizeDirection::Down) {
    detail::require<ShapeError>(img.h() % scale == 0 && img.w() % scale == 0,
                                "bicubic_resize: " + img.dims().str() + " not divisible by " +
                                    std::to_string(scale));
    out_h = img.h() / scale;
    out_w = img.w() / scale;
  } else {
    out_h = img.h() * scale;
    out_w = img.w() * scale;
  }
  auto ty = detail::resample_taps(img.h(), out_h, scale, dir);
  auto tx = detail::resample_taps(img.w(), out_w, scale, dir);
  Tensor4 out = detail::separable_apply(img, ty, out_h, tx, out_w);
  detail::clamp01(out);
  return out;
}

/// Normalized k x k Gaussian sampled at integer offsets, row-major.
inline std::vector<double> gaussian_kernel(int k, double sigma) {
  detail::require<ConfigError>(k >= 1 && k % 2 == 1, "gaussian kernel size must be odd");
  detail::require<ConfigError>(sigma > 0, "gaussian sigma must be positive");
  const int r = k / 2;
  std::vector<double> g(static_cast<std::size_t>(k) * k);
  double sum = 0.0;
  for (int y = -r; y <= r; ++y)
    for (int x = -r; x <= r; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
      g[(y + r) * k + (x + r)] = v;
      sum += v;
    }
  for (auto& v : g) v /= sum;
  return g;
}

/// Per-channel Gaussian blur with replicate padding.
inline Tensor4 gaussian_blur(const Tensor4& img, int k, double sigma) {
  detail::require<ConfigError>(k >= 1 && k % 2 == 1, "gaussian_blur: kernel size must be odd");
  detail::require<ConfigError>(sigma > 0, "gaussian_blur: sigma must be positive");
  // The 2-D kernel is the outer product of this normalized 1-D kernel.
  const int r = k / 2;
  std::vector<double> g1(k);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += g1[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (auto& v : g1) v /= sum;
  auto taps_for = [&](int len) {
    detail::ResampleTaps t;
    t.taps = k;
    t.index.resize(static_cast<std::size_t>(len) * k);
    t.weight.resize(t.index.size());
    for (int o = 0; o < len; ++o)
      for (int j = 0; j < k; ++j) {
        t.index[o * k + j] = std::clamp(o + j - r, 0, len - 1);
        t.weight[o * k + j] = g1[j];
      }
    return t;
  };
  return detail::separable_apply(img, taps_for(img.h()), img.h(), taps_for(img.w()), img.w());
}

/// Adds i.i.d. N(0, (sigma255 / 255)^2) noise and clamps to [0, 1].
inline Tensor4 add_gaussian_noise(const Tensor4& img, double sigma255, std::uint64_t seed) {
  detail::require<ConfigError>(sigma255 >= 0, "add_gaussian_noise: sigma must be non-negative");
  if (sigma255 == 0) return img;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma255 / 255.0);
  Tensor4 out(img.dims());
  for (std::size_t i = 0; i < img.size(); ++i)
    out[i] = std::clamp(static_cast<float>(img[i] + normal(rng)), 0.0f, 1.0f);
  return out;
}

inline Tensor4 degrade(const Tensor4& hr, const DegradationSpec& spec, std::uint64_t seed) {
  spec.validate();
  detail::require<ShapeError>(hr.h() % spec.scale == 0 && hr.w() % spec.scale == 0,
                              "degrade: HR dims " + hr.dims().str() + " not divisible by scale " +
                                  std::to_string(spec.scale));
  switch (spec.kind) {
    case DegradationKind::BI:
      return bicubic_resize(hr, spec.scale, ResizeDirection::Down);
    case DegradationKind::BD:
      return bicubic_resize(gaussian_blur(hr, spec.blur_kernel_size, spec.blur_sigma), spec.scale,
                            ResizeDirection::Down);
    case DegradationKind::DN:
      return add_gaussian_noise(bicubic_resize(hr, spec.scale, ResizeDirection::Down), spec.noise_sigma,
                                seed);
  }
  throw ConfigError("degrade: unknown kind");
}

struct PatchPair {
  Tensor4 lr;
  Tensor4 hr;
  int variant = 0;
  // Source window, in LR pixels, before augmentation.
  int image = 0;
  int lr_y = 0;
  int lr_x = 0;
};

inline PatchPair augment(const PatchPair& pair, int variant) {
  check_variant(variant);
  PatchPair out = pair;
  out.lr = dihedral_apply(pair.lr, variant);
  out.hr = dihedral_apply(pair.hr, variant);
  out.variant = dihedral_compose(pair.variant, variant);
  return out;
}

/// LR patch edge per scale used during training: 60 (x2), 50 (x3), 40 (x4).
inline int default_lr_patch(int scale) {
  switch (scale) {
    case 2: return 60;
    case 3: return 50;
    case 4: return 40;
    default: throw ConfigError("unsupported scale " + std::to_string(scale));
  }
}

/// Degrades each HR image once and crops aligned LR/HR windows from the pair.
class PatchSampler {
 public:
  PatchSampler(std::vector<Tensor4> hr_images, const DegradationSpec& spec, std::uint64_t seed)
      : spec_(spec), hr_(std::move(hr_images)) {
    spec.validate();
    detail::require<ConfigError>(!hr_.empty(), "patch sampler: no images");
    for (std::size_t i = 0; i < hr_.size(); ++i) {
      hr_[i] = modcrop(hr_[i], spec.scale);
      lr_.push_back(degrade(hr_[i], spec, seed + i));
    }
  }

  const DegradationSpec& spec() const { return spec_; }
  const std::vector<Tensor4>& hr_images() const { return hr_; }
  const std::vector<Tensor4>& lr_images() const { return lr_; }

  template <class Rng>
  PatchPair sample(int patch, Rng& rng, bool random_augment) const {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(hr_.size()) - 1);
    const int idx = pick(rng);
    const auto& lr = lr_[idx];
    detail::require<ShapeError>(lr.h() >= patch && lr.w() >= patch,
                                "image " + std::to_string(idx) + " too small for LR patch " +
                                    std::to_string(patch));
    std::uniform_int_distribution<int> py(0, lr.h() - patch), px(0, lr.w() - patch);
    PatchPair p;
    p.image = idx;
    p.lr_y = py(rng);
    p.lr_x = px(rng);
    const int s = spec_.scale;
    p.lr = crop(lr, p.lr_y, p.lr_x, patch, patch);
    p.hr = crop(hr_[idx], p.lr_y * s, p.lr_x * s, patch * s, patch * s);
    if (random_augment) {
      std::uniform_int_distribution<int> var(0, 7);
      p = augment(p, var(rng));
    }
    return p;
  }

 private:
  DegradationSpec spec_;
  std::vector<Tensor4> hr_;
  std::vector<Tensor4> lr_;
};

inline std::vector<PatchPair> sample_patch_pairs(const std::vector<Tensor4>& hr_images,
                                                 const DegradationSpec& spec, int lr_patch, int count,
                                                 std::uint64_t seed, bool random_augment = true) {
  for (const auto& img : hr_images)
    detail::require<ShapeError>(img.h() >= spec.scale * lr_patch && img.w() >= spec.scale * lr_patch,
                                "sample_patch_pairs: image " + img.dims().str() + " smaller than " +
                                    std::to_string(spec.scale * lr_patch));
  PatchSampler sampler(hr_images, spec, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<PatchPair> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sampler.sample(lr_patch, rng, random_augment));
  return out;
}

}  // namespace srfbn
