#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "srfbn/error.hpp"

namespace srfbn {

/// Extents of a batch of feature maps: (batch, channels, rows, columns).
struct Dims4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  constexpr std::size_t count() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  constexpr bool operator==(const Dims4&) const = default;

  std::string str() const {
    std::ostringstream os;
    os << n << "x" << c << "x" << h << "x" << w;
    return os.str();
  }
};

/// Dense 4-D array stored row-major in (n, c, h, w) order.
template <class Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  Tensor() = default;
  explicit Tensor(Dims4 dims, Scalar fill = Scalar(0)) : dims_(dims) {
    detail::require<ShapeError>(dims.n >= 0 && dims.c >= 0 && dims.h >= 0 && dims.w >= 0,
                                "negative tensor extent " + dims.str());
    data_.assign(dims.count(), fill);
  }
  Tensor(Dims4 dims, std::vector<Scalar> data) : dims_(dims), data_(std::move(data)) {
    detail::require<ShapeError>(data_.size() == dims.count(),
                                "tensor data length does not match dims " + dims.str());
  }
  Tensor(int n, int c, int h, int w, Scalar fill = Scalar(0)) : Tensor(Dims4{n, c, h, w}, fill) {}

  const Dims4& dims() const { return dims_; }
  int n() const { return dims_.n; }
  int c() const { return dims_.c; }
  int h() const { return dims_.h; }
  int w() const { return dims_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> span() { return data_; }
  std::span<const Scalar> span() const { return data_; }
  std::vector<Scalar>& storage() & { return data_; }
  const std::vector<Scalar>& storage() const& { return data_; }
  // Moves out of temporaries so `for (v : f().storage())` stays valid.
  std::vector<Scalar> storage() && { return std::move(data_); }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * dims_.c + ic) * dims_.h + iy) * dims_.w + ix;
  }
  Scalar& operator()(int in, int ic, int iy, int ix) { return data_[index(in, ic, iy, ix)]; }
  Scalar operator()(int in, int ic, int iy, int ix) const { return data_[index(in, ic, iy, ix)]; }
  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  /// Pointer to the (h, w) plane of sample `in`, channel `ic`.
  Scalar* plane(int in, int ic) { return data_.data() + index(in, ic, 0, 0); }
  const Scalar* plane(int in, int ic) const { return data_.data() + index(in, ic, 0, 0); }

  void fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor& operator+=(const Tensor& other) {
    detail::require<ShapeError>(dims_ == other.dims_,
                                "tensor add: " + dims_.str() + " vs " + other.dims_.str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  template <class Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return Tensor<Other>(dims_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;

 private:
  Dims4 dims_{};
  std::vector<Scalar> data_;
};

using Tensor4 = Tensor<float>;

template <class Scalar>
Tensor<Scalar> zeros_like(const Tensor<Scalar>& t) {
  return Tensor<Scalar>(t.dims());
}

/// Sum of elementwise products, accumulated in double.
template <class Scalar>
double dot(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require<ShapeError>(a.dims() == b.dims(), "dot: dims mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

template <class Scalar>
double max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require<ShapeError>(a.dims() == b.dims(), "max_abs_diff: dims mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

/// Copy of samples [begin, begin + count) along the batch axis.
template <class Scalar>
Tensor<Scalar> batch_slice(const Tensor<Scalar>& t, int begin, int count) {
  detail::require<ShapeError>(begin >= 0 && count >= 0 && begin + count <= t.n(),
                              "batch_slice out of range");
  Tensor<Scalar> out(Dims4{count, t.c(), t.h(), t.w()});
  const std::size_t per = static_cast<std::size_t>(t.c()) * t.h() * t.w();
  std::copy_n(t.data() + begin * per, count * per, out.data());
  return out;
}

/// Stack equally shaped tensors along the batch axis.
template <class Scalar>
Tensor<Scalar> batch_stack(std::span<const Tensor<Scalar>> parts) {
  detail::require<ShapeError>(!parts.empty(), "batch_stack: no parts");
  const Dims4 d0 = parts.front().dims();
  int total = 0;
  for (const auto& p : parts) {
    detail::require<ShapeError>(p.c() == d0.c && p.h() == d0.h && p.w() == d0.w,
                                "batch_stack: part dims differ");
    total += p.n();
  }
  Tensor<Scalar> out(Dims4{total, d0.c, d0.h, d0.w});
  Scalar* dst = out.data();
  for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
  return out;
}

}  // namespace srfbn
