#pragma once

// The eight flip/rotation symmetries of a rectangular grid.
//
// Variant v applies a horizontal flip when v >= 4, then v % 4 counter-clockwise
// quarter turns. Variant 0 is the identity.

#include <string>

#include "srfbn/error.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

inline void check_variant(int variant) {
  detail::require<ConfigError>(variant >= 0 && variant < 8,
                               "dihedral variant must be in 0..7, got " + std::to_string(variant));
}

template <class Scalar>
Tensor<Scalar> flip_horizontal(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.dims());
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c)
      for (int i = 0; i < x.h(); ++i)
        for (int j = 0; j < x.w(); ++j) y(b, c, i, x.w() - 1 - j) = x(b, c, i, j);
  return y;
}

/// One counter-clockwise quarter turn; (h, w) becomes (w, h).
template <class Scalar>
Tensor<Scalar> rotate90(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(Dims4{x.n(), x.c(), x.w(), x.h()});
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c)
      for (int i = 0; i < y.h(); ++i)
        for (int j = 0; j < y.w(); ++j) y(b, c, i, j) = x(b, c, j, x.w() - 1 - i);
  return y;
}

template <class Scalar>
Tensor<Scalar> rotate90_times(Tensor<Scalar> x, int turns) {
  turns = ((turns % 4) + 4) % 4;
  for (int i = 0; i < turns; ++i) x = rotate90(x);
  return x;
}

template <class Scalar>
Tensor<Scalar> dihedral_apply(const Tensor<Scalar>& x, int variant) {
  check_variant(variant);
  Tensor<Scalar> y = variant >= 4 ? flip_horizontal(x) : x;
  return rotate90_times(std::move(y), variant % 4);
}

template <class Scalar>
Tensor<Scalar> dihedral_invert(const Tensor<Scalar>& x, int variant) {
  check_variant(variant);
  Tensor<Scalar> y = rotate90_times(x, 4 - variant % 4);
  return variant >= 4 ? flip_horizontal(y) : y;
}

/// Index of the variant equal to applying `first` and then `second`.
inline int dihedral_compose(int first, int second) {
  check_variant(first);
  check_variant(second);
  // An element is r^a f^b acting as x -> r^a(f^b(x)), and f r = r^-1 f.
  const int a1 = first % 4, f1 = first / 4;
  const int a2 = second % 4, f2 = second / 4;
  const int a = f2 ? (a2 - a1 + 4) % 4 : (a2 + a1) % 4;
  return ((f1 ^ f2) ? 4 : 0) + a;
}

}  // namespace srfbn
