#pragma once

// Raw forward/backward kernels on tensors. No autodiff bookkeeping here;
// see autograd.hpp for the recorded versions.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "srfbn/error.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

/// Square-kernel convolution geometry.
struct ConvGeometry {
  int k = 1;
  int stride = 1;
  int pad = 0;

  constexpr bool operator==(const ConvGeometry&) const = default;

  void validate() const {
    detail::require<ConfigError>(k >= 1 && stride >= 1 && pad >= 0,
                                 "conv geometry requires k >= 1, stride >= 1, pad >= 0");
  }
  /// Spatial output extent of a strided convolution.
  int conv_out(int in) const {
    const int span = in + 2 * pad - k;
    return span < 0 ? 0 : span / stride + 1;
  }
  /// Spatial output extent of the transposed convolution.
  int deconv_out(int in) const { return (in - 1) * stride - 2 * pad + k; }
};

namespace kernels {

template <class Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using MatMap = Eigen::Map<RowMatrix<Scalar>>;
template <class Scalar>
using ConstMatMap = Eigen::Map<const RowMatrix<Scalar>>;

/// Unfolds one (channels, h, w) image into a (channels*k*k, oh*ow) patch matrix.
template <class Scalar>
void im2col(const Scalar* img, int channels, int h, int w, const ConvGeometry& g, int oh, int ow,
            Scalar* col) {
  const int k = g.k;
  for (int c = 0; c < channels; ++c) {
    const Scalar* src = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* row = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          Scalar* dst = row + static_cast<std::size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, Scalar(0));
            continue;
          }
          const Scalar* line = src + static_cast<std::size_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < w) ? line[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters-adds a patch matrix back into an image.
template <class Scalar>
void col2im_add(const Scalar* col, int channels, int h, int w, const ConvGeometry& g, int oh, int ow,
                Scalar* img) {
  const int k = g.k;
  for (int c = 0; c < channels; ++c) {
    Scalar* dst = img + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* row = col + (static_cast<std::size_t>(c * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= h) continue;
          Scalar* line = dst + static_cast<std::size_t>(iy) * w;
          const Scalar* src = row + static_cast<std::size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < w) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

/// Output dims of conv2d; throws on non-positive extents.
inline Dims4 conv2d_dims(const Dims4& in, int c_out, const ConvGeometry& g) {
  g.validate();
  const int oh = g.conv_out(in.h);
  const int ow = g.conv_out(in.w);
  detail::require<ShapeError>(oh >= 1 && ow >= 1,
                              "conv2d: non-positive output extent for input " + in.str());
  return {in.n, c_out, oh, ow};
}

inline Dims4 deconv2d_dims(const Dims4& in, int c_out, const ConvGeometry& g) {
  g.validate();
  detail::require<ShapeError>(in.h >= 1 && in.w >= 1, "deconv2d: empty input " + in.str());
  const int oh = g.deconv_out(in.h);
  const int ow = g.deconv_out(in.w);
  detail::require<ShapeError>(oh >= 1 && ow >= 1,
                              "deconv2d: non-positive output extent for input " + in.str());
  return {in.n, c_out, oh, ow};
}

/// Cross-correlation. weight is (c_out, c_in, k, k), bias has c_out entries (may be empty).
template <class Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                              std::span<const Scalar> bias, const ConvGeometry& g) {
  const int c_out = weight.n();
  const int c_in = weight.c();
  detail::require<ShapeError>(weight.h() == g.k && weight.w() == g.k,
                              "conv2d: weight kernel extent differs from geometry");
  detail::require<ShapeError>(x.c() == c_in, "conv2d: input has " + std::to_string(x.c()) +
                                                  " channels, weight expects " +
                                                  std::to_string(c_in));
  detail::require<ShapeError>(bias.empty() || static_cast<int>(bias.size()) == c_out,
                              "conv2d: bias length mismatch");
  const Dims4 od = conv2d_dims(x.dims(), c_out, g);
  Tensor<Scalar> y(od);
  const int rows = c_in * g.k * g.k;
  const int cols = od.h * od.w;
  std::vector<Scalar> col(static_cast<std::size_t>(rows) * cols);
  ConstMatMap<Scalar> wm(weight.data(), c_out, rows);
  for (int b = 0; b < x.n(); ++b) {
    im2col(x.plane(b, 0), c_in, x.h(), x.w(), g, od.h, od.w, col.data());
    MatMap<Scalar> ym(y.plane(b, 0), c_out, cols);
    ym.noalias() = wm * ConstMatMap<Scalar>(col.data(), rows, cols);
    if (!bias.empty())
      for (int o = 0; o < c_out; ++o) ym.row(o).array() += bias[o];
  }
  return y;
}

/// Sequential on purpose: a vectorized reduction's rounding depends on the
/// buffer address, which would make training runs differ bitwise.
template <class Scalar>
void add_row_sums(const Scalar* m, int rows, int cols, Scalar* out) {
  for (int r = 0; r < rows; ++r) {
    Scalar acc = 0;
    for (int c = 0; c < cols; ++c) acc += m[static_cast<std::size_t>(r) * cols + c];
    out[r] += acc;
  }
}

/// Gradients of conv2d. Any of dx/dweight/dbias may be null; results are accumulated.
template <class Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& dy,
                     const ConvGeometry& g, Tensor<Scalar>* dx, Tensor<Scalar>* dweight,
                     Scalar* dbias) {
  const int c_out = weight.n();
  const int c_in = weight.c();
  const int rows = c_in * g.k * g.k;
  const int cols = dy.h() * dy.w();
  std::vector<Scalar> col(static_cast<std::size_t>(rows) * cols);
  ConstMatMap<Scalar> wm(weight.data(), c_out, rows);
  for (int b = 0; b < x.n(); ++b) {
    ConstMatMap<Scalar> dym(dy.plane(b, 0), c_out, cols);
    if (dweight) {
      im2col(x.plane(b, 0), c_in, x.h(), x.w(), g, dy.h(), dy.w(), col.data());
      MatMap<Scalar>(dweight->data(), c_out, rows).noalias() +=
          dym * ConstMatMap<Scalar>(col.data(), rows, cols).transpose();
    }
    if (dx) {
      MatMap<Scalar> colm(col.data(), rows, cols);
      colm.noalias() = wm.transpose() * dym;
      col2im_add(col.data(), c_in, x.h(), x.w(), g, dy.h(), dy.w(), dx->plane(b, 0));
    }
    if (dbias) add_row_sums(dy.plane(b, 0), c_out, cols, dbias);
  }
}

/// Transposed convolution (adjoint of conv2d w.r.t. its input).
/// weight is (c_in, c_out, k, k), the same tensor a conv2d mapping c_out -> c_in would use.
template <class Scalar>
Tensor<Scalar> deconv2d_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight,
                                std::span<const Scalar> bias, const ConvGeometry& g) {
  const int c_in = weight.n();
  const int c_out = weight.c();
  detail::require<ShapeError>(weight.h() == g.k && weight.w() == g.k,
                              "deconv2d: weight kernel extent differs from geometry");
  detail::require<ShapeError>(x.c() == c_in, "deconv2d: input has " + std::to_string(x.c()) +
                                                  " channels, weight expects " +
                                                  std::to_string(c_in));
  detail::require<ShapeError>(bias.empty() || static_cast<int>(bias.size()) == c_out,
                              "deconv2d: bias length mismatch");
  const Dims4 od = deconv2d_dims(x.dims(), c_out, g);
  Tensor<Scalar> y(od);
  const int rows = c_out * g.k * g.k;
  const int cols = x.h() * x.w();
  std::vector<Scalar> col(static_cast<std::size_t>(rows) * cols);
  ConstMatMap<Scalar> wm(weight.data(), c_in, rows);
  for (int b = 0; b < x.n(); ++b) {
    MatMap<Scalar>(col.data(), rows, cols).noalias() =
        wm.transpose() * ConstMatMap<Scalar>(x.plane(b, 0), c_in, cols);
    col2im_add(col.data(), c_out, od.h, od.w, g, x.h(), x.w(), y.plane(b, 0));
    if (!bias.empty()) {
      MatMap<Scalar> ym(y.plane(b, 0), c_out, od.h * od.w);
      for (int o = 0; o < c_out; ++o) ym.row(o).array() += bias[o];
    }
  }
  return y;
}

template <class Scalar>
void deconv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& dy,
                       const ConvGeometry& g, Tensor<Scalar>* dx, Tensor<Scalar>* dweight,
                       Scalar* dbias) {
  const int c_in = weight.n();
  const int c_out = weight.c();
  const int rows = c_out * g.k * g.k;
  const int cols = x.h() * x.w();
  std::vector<Scalar> col(static_cast<std::size_t>(rows) * cols);
  ConstMatMap<Scalar> wm(weight.data(), c_in, rows);
  for (int b = 0; b < x.n(); ++b) {
    im2col(dy.plane(b, 0), c_out, dy.h(), dy.w(), g, x.h(), x.w(), col.data());
    ConstMatMap<Scalar> colm(col.data(), rows, cols);
    if (dx) MatMap<Scalar>(dx->plane(b, 0), c_in, cols).noalias() += wm * colm;
    if (dweight)
      MatMap<Scalar>(dweight->data(), c_in, rows).noalias() +=
          ConstMatMap<Scalar>(x.plane(b, 0), c_in, cols) * colm.transpose();
    if (dbias) add_row_sums(dy.plane(b, 0), c_out, dy.h() * dy.w(), dbias);
  }
}

template <class Scalar>
Tensor<Scalar> prelu_forward(const Tensor<Scalar>& x, std::span<const Scalar> alpha) {
  detail::require<ShapeError>(static_cast<int>(alpha.size()) == x.c(),
                              "prelu: alpha length " + std::to_string(alpha.size()) +
                                  " != channels " + std::to_string(x.c()));
  Tensor<Scalar> y(x.dims());
  const std::size_t hw = x.dims().plane();
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c) {
      const Scalar* src = x.plane(b, c);
      Scalar* dst = y.plane(b, c);
      const Scalar a = alpha[c];
      for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] >= Scalar(0) ? src[i] : a * src[i];
    }
  return y;
}

template <class Scalar>
void prelu_backward(const Tensor<Scalar>& x, std::span<const Scalar> alpha, const Tensor<Scalar>& dy,
                    Tensor<Scalar>* dx, Scalar* dalpha) {
  const std::size_t hw = x.dims().plane();
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c) {
      const Scalar* src = x.plane(b, c);
      const Scalar* g = dy.plane(b, c);
      const Scalar a = alpha[c];
      Scalar da = 0;
      Scalar* d = dx ? dx->plane(b, c) : nullptr;
      for (std::size_t i = 0; i < hw; ++i) {
        if (src[i] >= Scalar(0)) {
          if (d) d[i] += g[i];
        } else {
          if (d) d[i] += a * g[i];
          da += src[i] * g[i];
        }
      }
      if (dalpha) dalpha[c] += da;
    }
}

template <class Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>* const> parts) {
  detail::require<ShapeError>(!parts.empty(), "concat_channels: no parts");
  const Dims4 d0 = parts.front()->dims();
  int channels = 0;
  for (const auto* p : parts) {
    detail::require<ShapeError>(p->n() == d0.n && p->h() == d0.h && p->w() == d0.w,
                                "concat_channels: part " + p->dims().str() + " vs " + d0.str());
    channels += p->c();
  }
  Tensor<Scalar> y(Dims4{d0.n, channels, d0.h, d0.w});
  const std::size_t hw = d0.plane();
  for (int b = 0; b < d0.n; ++b) {
    Scalar* dst = y.plane(b, 0);
    for (const auto* p : parts) {
      const Scalar* src = p->plane(b, 0);
      dst = std::copy(src, src + hw * p->c(), dst);
    }
  }
  return y;
}

/// Channels [begin, begin + count) of x.
template <class Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, int begin, int count) {
  detail::require<ShapeError>(begin >= 0 && count >= 1 && begin + count <= x.c(),
                              "slice_channels: range out of bounds");
  Tensor<Scalar> y(Dims4{x.n(), count, x.h(), x.w()});
  const std::size_t hw = x.dims().plane();
  for (int b = 0; b < x.n(); ++b)
    std::copy_n(x.plane(b, begin), hw * count, y.plane(b, 0));
  return y;
}

/// Linear interpolation taps for one axis (half-pixel centers, clamped edges).
struct LinearTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

inline LinearTaps linear_taps(int in, int scale) {
  const int out = in * scale;
  LinearTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) / scale - 0.5;
    if (src < 0) src = 0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    t.lo[o] = i0;
    t.hi[o] = std::min(i0 + 1, in - 1);
    t.frac[o] = src - i0;
  }
  return t;
}

inline void check_upsample_scale(int scale) {
  detail::require<ConfigError>(scale == 2 || scale == 3 || scale == 4,
                               "unsupported upsampling scale " + std::to_string(scale));
}

template <class Scalar>
Tensor<Scalar> bilinear_forward(const Tensor<Scalar>& x, int scale) {
  check_upsample_scale(scale);
  const LinearTaps ty = linear_taps(x.h(), scale);
  const LinearTaps tx = linear_taps(x.w(), scale);
  Tensor<Scalar> y(Dims4{x.n(), x.c(), x.h() * scale, x.w() * scale});
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c) {
      const Scalar* src = x.plane(b, c);
      Scalar* dst = y.plane(b, c);
      for (int oy = 0; oy < y.h(); ++oy) {
        const Scalar* r0 = src + static_cast<std::size_t>(ty.lo[oy]) * x.w();
        const Scalar* r1 = src + static_cast<std::size_t>(ty.hi[oy]) * x.w();
        const double fy = ty.frac[oy];
        for (int ox = 0; ox < y.w(); ++ox) {
          const double fx = tx.frac[ox];
          const double top = r0[tx.lo[ox]] * (1 - fx) + r0[tx.hi[ox]] * fx;
          const double bot = r1[tx.lo[ox]] * (1 - fx) + r1[tx.hi[ox]] * fx;
          dst[static_cast<std::size_t>(oy) * y.w() + ox] = static_cast<Scalar>(top * (1 - fy) + bot * fy);
        }
      }
    }
  return y;
}

template <class Scalar>
void bilinear_backward(const Tensor<Scalar>& dy, int scale, Tensor<Scalar>& dx) {
  const LinearTaps ty = linear_taps(dx.h(), scale);
  const LinearTaps tx = linear_taps(dx.w(), scale);
  for (int b = 0; b < dx.n(); ++b)
    for (int c = 0; c < dx.c(); ++c) {
      const Scalar* g = dy.plane(b, c);
      Scalar* d = dx.plane(b, c);
      for (int oy = 0; oy < dy.h(); ++oy) {
        Scalar* r0 = d + static_cast<std::size_t>(ty.lo[oy]) * dx.w();
        Scalar* r1 = d + static_cast<std::size_t>(ty.hi[oy]) * dx.w();
        const double fy = ty.frac[oy];
        for (int ox = 0; ox < dy.w(); ++ox) {
          const double v = g[static_cast<std::size_t>(oy) * dy.w() + ox];
          const double fx = tx.frac[ox];
          r0[tx.lo[ox]] += static_cast<Scalar>(v * (1 - fy) * (1 - fx));
          r0[tx.hi[ox]] += static_cast<Scalar>(v * (1 - fy) * fx);
          r1[tx.lo[ox]] += static_cast<Scalar>(v * fy * (1 - fx));
          r1[tx.hi[ox]] += static_cast<Scalar>(v * fy * fx);
        }
      }
    }
}

template <class Scalar>
double l1_forward(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::require<ShapeError>(pred.dims() == target.dims(), "l1_loss: dims " + pred.dims().str() +
                                                                 " vs " + target.dims().str());
  detail::require<ShapeError>(pred.size() > 0, "l1_loss: empty tensors");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    acc += std::abs(static_cast<double>(pred[i]) - target[i]);
  return acc / static_cast<double>(pred.size());
}

/// d/dpred of mean |pred - target|, scaled by upstream. Subgradient at zero is 0.
template <class Scalar>
void l1_backward(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, double upstream,
                 Tensor<Scalar>* dpred, Tensor<Scalar>* dtarget) {
  const double scale = upstream / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const Scalar diff = pred[i] - target[i];
    const Scalar s = diff > 0 ? Scalar(scale) : (diff < 0 ? Scalar(-scale) : Scalar(0));
    if (dpred) (*dpred)[i] += s;
    if (dtarget) (*dtarget)[i] -= s;
  }
}

}  // namespace kernels
}  // namespace srfbn
