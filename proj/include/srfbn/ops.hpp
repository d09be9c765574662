#pragma once

// Plain (non-recording) tensor operations.

#include <span>
#include <vector>

#include "srfbn/kernels.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

/// Weights and bias of a convolution or transposed convolution layer.
///
/// For conv2d the weight tensor is (c_out, c_in, k, k). For deconv2d it is
/// (c_in, c_out, k, k), so a deconv2d with the same tensor is the adjoint of
/// the conv2d that maps c_out channels to c_in.
template <class Scalar>
struct BasicConvParams {
  ConvGeometry geom;
  int c_in = 0;
  int c_out = 0;
  Tensor<Scalar> weights;
  std::vector<Scalar> bias;

  static BasicConvParams conv(int c_in, int c_out, ConvGeometry g) {
    return {g, c_in, c_out, Tensor<Scalar>(Dims4{c_out, c_in, g.k, g.k}),
            std::vector<Scalar>(c_out, Scalar(0))};
  }
  static BasicConvParams deconv(int c_in, int c_out, ConvGeometry g) {
    return {g, c_in, c_out, Tensor<Scalar>(Dims4{c_in, c_out, g.k, g.k}),
            std::vector<Scalar>(c_out, Scalar(0))};
  }
};
using ConvParams = BasicConvParams<float>;

template <class Scalar>
struct BasicPReLUParams {
  std::vector<Scalar> alpha;
};
using PReLUParams = BasicPReLUParams<float>;

namespace detail {
template <class Scalar>
void check_conv_params(const BasicConvParams<Scalar>& p, bool transposed) {
  p.geom.validate();
  const Dims4 want = transposed ? Dims4{p.c_in, p.c_out, p.geom.k, p.geom.k}
                                : Dims4{p.c_out, p.c_in, p.geom.k, p.geom.k};
  require<ShapeError>(p.weights.dims() == want,
                      "conv params: weights " + p.weights.dims().str() + ", expected " + want.str());
  require<ShapeError>(p.bias.empty() || static_cast<int>(p.bias.size()) == p.c_out,
                      "conv params: bias length mismatch");
}
}  // namespace detail

template <class Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const BasicConvParams<Scalar>& params) {
  detail::check_conv_params(params, false);
  return kernels::conv2d_forward<Scalar>(input, params.weights, params.bias, params.geom);
}

template <class Scalar>
Tensor<Scalar> deconv2d(const Tensor<Scalar>& input, const BasicConvParams<Scalar>& params) {
  detail::check_conv_params(params, true);
  return kernels::deconv2d_forward<Scalar>(input, params.weights, params.bias, params.geom);
}

template <class Scalar>
Tensor<Scalar> prelu(const Tensor<Scalar>& input, const BasicPReLUParams<Scalar>& params) {
  return kernels::prelu_forward<Scalar>(input, params.alpha);
}

template <class Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> parts) {
  std::vector<const Tensor<Scalar>*> ptrs;
  ptrs.reserve(parts.size());
  for (const auto& p : parts) ptrs.push_back(&p);
  return kernels::concat_channels<Scalar>(ptrs);
}

template <class Scalar>
Tensor<Scalar> concat_channels(const std::vector<Tensor<Scalar>>& parts) {
  return concat_channels(std::span<const Tensor<Scalar>>(parts));
}

template <class Scalar>
Tensor<Scalar> slice_channels(const Tensor<Scalar>& x, int begin, int count) {
  return kernels::slice_channels(x, begin, count);
}

template <class Scalar>
Tensor<Scalar> bilinear_upsample(const Tensor<Scalar>& input, int scale) {
  return kernels::bilinear_forward(input, scale);
}

template <class Scalar>
double l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  return kernels::l1_forward(pred, target);
}

}  // namespace srfbn
