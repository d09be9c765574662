#pragma once

// Feature-map diagnostics: channel-mean maps and annulus-averaged power spectra.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "srfbn/error.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

/// Mean over the channel axis of a batch-1 tensor, as a 1 x 1 x h x w map.
inline Tensor4 average_feature_map(const Tensor4& features) {
  detail::require<ShapeError>(features.n() == 1, "average_feature_map: batch must be 1, got " +
                                                     features.dims().str());
  detail::require<ShapeError>(features.c() >= 1, "average_feature_map: no channels");
  const std::size_t hw = features.dims().plane();
  std::vector<double> acc(hw, 0.0);
  for (int c = 0; c < features.c(); ++c) {
    const float* src = features.plane(0, c);
    for (std::size_t i = 0; i < hw; ++i) acc[i] += src[i];
  }
  Tensor4 out(Dims4{1, 1, features.h(), features.w()});
  for (std::size_t i = 0; i < hw; ++i) out[i] = static_cast<float>(acc[i] / features.c());
  return out;
}

struct SpectralProfile {
  std::vector<double> mean;           // mean power per annulus
  std::vector<std::size_t> count;     // frequency samples per annulus
  std::vector<double> radius_lo;      // inner normalized radius of each annulus
  double total_energy = 0.0;          // sum of power over the whole spectrum
};

namespace detail {

/// Signed normalized frequency of DFT index k out of n, in [-0.5, 0.5).
inline double dft_frequency(int k, int n) {
  const int shifted = k < (n + 1) / 2 ? k : k - n;
  return static_cast<double>(shifted) / n;
}

/// 2-D DFT power |X|^2 computed row-then-column.
inline std::vector<double> power_spectrum(const std::vector<double>& x, int h, int w) {
  using cd = std::complex<double>;
  auto twiddles = [](int n) {
    std::vector<cd> t(static_cast<std::size_t>(n) * n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        t[k * n + j] = std::polar(1.0, -2.0 * std::numbers::pi * ((static_cast<long long>(k) * j) % n) / n);
    return t;
  };
  const auto tw = twiddles(w), th = twiddles(h);
  std::vector<cd> rows(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y)
    for (int k = 0; k < w; ++k) {
      cd acc = 0;
      for (int j = 0; j < w; ++j) acc += x[y * w + j] * tw[k * w + j];
      rows[y * w + k] = acc;
    }
  std::vector<double> power(rows.size());
  for (int kx = 0; kx < w; ++kx)
    for (int ky = 0; ky < h; ++ky) {
      cd acc = 0;
      for (int y = 0; y < h; ++y) acc += rows[y * w + kx] * th[ky * h + y];
      power[ky * w + kx] = std::norm(acc);
    }
  return power;
}

}  // namespace detail

/// Annulus bin of a normalized radial frequency r; radii beyond 0.5 (the
/// spectrum corners) fall into the last bin.
inline int spectral_bin(double r, int bins) {
  return std::min(bins - 1, static_cast<int>(std::floor(r / 0.5 * bins)));
}

/// Radial power profile of a 1 x 1 x h x w map over `bins` equal-width annuli
/// of normalized frequency [0, 0.5]. With `standardize`, the map is shifted to
/// zero mean and scaled to unit variance first (a constant map stays zero).
inline SpectralProfile spectral_density(const Tensor4& map, int bins, bool standardize = false) {
  detail::require<ConfigError>(bins >= 2, "spectral_density: need at least 2 bins");
  detail::require<ShapeError>(map.n() == 1 && map.c() == 1 && map.h() >= 2 && map.w() >= 2,
                              "spectral_density: expected a 1x1xHxW map with H, W >= 2, got " + map.dims().str());
  const int h = map.h(), w = map.w();
  std::vector<double> x(map.storage().begin(), map.storage().end());
  if (standardize) {
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(x.size());
    double var = 0.0;
    for (double& v : x) {
      v -= mu;
      var += v * v;
    }
    var /= static_cast<double>(x.size());
    if (var > 0)
      for (double& v : x) v /= std::sqrt(var);
  }
  const auto power = detail::power_spectrum(x, h, w);
  SpectralProfile prof;
  prof.mean.assign(bins, 0.0);
  prof.count.assign(bins, 0);
  for (int b = 0; b < bins; ++b) prof.radius_lo.push_back(0.5 * b / bins);
  for (int ky = 0; ky < h; ++ky)
    for (int kx = 0; kx < w; ++kx) {
      const double fy = detail::dft_frequency(ky, h), fx = detail::dft_frequency(kx, w);
      const int b = spectral_bin(std::hypot(fy, fx), bins);
      const double p = power[ky * w + kx];
      prof.mean[b] += p;
      prof.count[b] += 1;
      prof.total_energy += p;
    }
  for (int b = 0; b < bins; ++b)
    if (prof.count[b] > 0) prof.mean[b] /= static_cast<double>(prof.count[b]);
  return prof;
}

}  // namespace srfbn
