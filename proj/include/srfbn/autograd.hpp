#pragma once

// Reverse-mode autodiff over Tensor values.
//
// A Tape owns every value produced during one forward pass. Ops append a node
// holding the output value, its input node ids, and a closure that pushes the
// node's gradient into its inputs. backward() walks the nodes in reverse
// creation order, which is a valid reverse topological order because inputs
// always exist before their consumers. Gradients accumulate with +=, so a
// value consumed several times (shared weights) receives the sum.

#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "srfbn/kernels.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

template <class Scalar>
class Tape;

/// Handle to a node on a Tape.
template <class Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ >= 0; }
  int id() const { return id_; }
  Tape<Scalar>* tape() const { return tape_; }
  const Tensor<Scalar>& value() const { return tape_->value(id_); }
  const Dims4& dims() const { return value().dims(); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

template <class Scalar>
class Tape {
 public:
  using scalar_type = Scalar;
  using Backward = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Tensor<Scalar> value) { return push(std::move(value), {}, {}, false); }
  Var<Scalar> leaf(Tensor<Scalar> value) { return push(std::move(value), {}, {}, true); }

  /// Appends an op output. The closure is dropped when no input needs a gradient.
  Var<Scalar> record(Tensor<Scalar> value, std::vector<int> inputs, Backward fn) {
    bool needs = false;
    for (int i : inputs) needs = needs || nodes_.at(i).requires_grad;
    if (!needs) fn = nullptr;
    return push(std::move(value), std::move(inputs), std::move(fn), needs);
  }

  std::size_t size() const { return nodes_.size(); }
  bool owns(const Var<Scalar>& v) const {
    return v.tape() == this && v.id() >= 0 && static_cast<std::size_t>(v.id()) < nodes_.size();
  }
  const Tensor<Scalar>& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(id).inputs; }

  /// Gradient accumulator for node `id`, zero-initialised on first access.
  Tensor<Scalar>& grad_buffer(int id) {
    auto& node = nodes_.at(id);
    if (!node.grad) node.grad.emplace(node.value.dims());
    return *node.grad;
  }
  const Tensor<Scalar>* grad_if_any(int id) const {
    const auto& node = nodes_.at(id);
    return node.grad ? &*node.grad : nullptr;
  }
  /// Gradient of the last backward root w.r.t. v; zeros when v was not reached.
  Tensor<Scalar> grad(const Var<Scalar>& v) const {
    const auto* g = grad_if_any(v.id());
    return g ? *g : Tensor<Scalar>(value(v.id()).dims());
  }

  void zero_grad() {
    for (auto& node : nodes_) node.grad.reset();
  }

  void backward(const Var<Scalar>& root) {
    detail::require<ShapeError>(owns(root), "backward: root is not on this tape");
    detail::require<ShapeError>(value(root.id()).size() == 1,
                                "backward: root must be a scalar, got " +
                                    value(root.id()).dims().str());
    grad_buffer(root.id())[0] += Scalar(1);
    for (int id = root.id(); id >= 0; --id) {
      auto& node = nodes_[id];
      if (node.grad && node.backward) node.backward(*this, id);
    }
  }

 private:
  struct Node {
    Tensor<Scalar> value;
    std::vector<int> inputs;
    Backward backward;
    bool requires_grad = false;
    std::optional<Tensor<Scalar>> grad;
  };

  Var<Scalar> push(Tensor<Scalar> value, std::vector<int> inputs, Backward fn, bool needs) {
    nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(fn), needs, std::nullopt});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::deque<Node> nodes_;
};

/// Recorded (differentiable) versions of the tensor ops.
namespace ag {

namespace detail {
template <class Scalar>
Tape<Scalar>& tape_of(const Var<Scalar>& v) {
  srfbn::detail::require<ShapeError>(v.valid(), "autograd: invalid variable");
  return *v.tape();
}
template <class Scalar>
void same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  srfbn::detail::require<ShapeError>(a.tape() == b.tape(), "autograd: variables on different tapes");
}
template <class Scalar>
std::span<const Scalar> bias_span(const Var<Scalar>& b) {
  if (!b.valid()) return {};
  return b.value().span();
}
}  // namespace detail

/// Cross-correlation; `bias` may be a default-constructed Var for no bias.
template <class Scalar>
Var<Scalar> conv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                   ConvGeometry g) {
  auto& tape = detail::tape_of(x);
  detail::same_tape(x, weight);
  std::vector<int> inputs{x.id(), weight.id()};
  if (bias.valid()) {
    detail::same_tape(x, bias);
    inputs.push_back(bias.id());
  }
  auto y = kernels::conv2d_forward<Scalar>(x.value(), weight.value(), detail::bias_span(bias), g);
  return tape.record(std::move(y), std::move(inputs), [g](Tape<Scalar>& t, int self) {
    const auto& in = t.inputs(self);
    const auto& dy = *t.grad_if_any(self);
    Tensor<Scalar>* dx = t.requires_grad(in[0]) ? &t.grad_buffer(in[0]) : nullptr;
    Tensor<Scalar>* dw = t.requires_grad(in[1]) ? &t.grad_buffer(in[1]) : nullptr;
    Scalar* db = (in.size() > 2 && t.requires_grad(in[2])) ? t.grad_buffer(in[2]).data() : nullptr;
    kernels::conv2d_backward<Scalar>(t.value(in[0]), t.value(in[1]), dy, g, dx, dw, db);
  });
}

/// Transposed convolution; weight layout (c_in, c_out, k, k).
template <class Scalar>
Var<Scalar> deconv2d(const Var<Scalar>& x, const Var<Scalar>& weight, const Var<Scalar>& bias,
                     ConvGeometry g) {
  auto& tape = detail::tape_of(x);
  detail::same_tape(x, weight);
  std::vector<int> inputs{x.id(), weight.id()};
  if (bias.valid()) {
    detail::same_tape(x, bias);
    inputs.push_back(bias.id());
  }
  auto y = kernels::deconv2d_forward<Scalar>(x.value(), weight.value(), detail::bias_span(bias), g);
  return tape.record(std::move(y), std::move(inputs), [g](Tape<Scalar>& t, int self) {
    const auto& in = t.inputs(self);
    const auto& dy = *t.grad_if_any(self);
    Tensor<Scalar>* dx = t.requires_grad(in[0]) ? &t.grad_buffer(in[0]) : nullptr;
    Tensor<Scalar>* dw = t.requires_grad(in[1]) ? &t.grad_buffer(in[1]) : nullptr;
    Scalar* db = (in.size() > 2 && t.requires_grad(in[2])) ? t.grad_buffer(in[2]).data() : nullptr;
    kernels::deconv2d_backward<Scalar>(t.value(in[0]), t.value(in[1]), dy, g, dx, dw, db);
  });
}

/// Channel-wise PReLU; alpha holds one slope per channel of x.
template <class Scalar>
Var<Scalar> prelu(const Var<Scalar>& x, const Var<Scalar>& alpha) {
  auto& tape = detail::tape_of(x);
  detail::same_tape(x, alpha);
  auto y = kernels::prelu_forward<Scalar>(x.value(), alpha.value().span());
  return tape.record(std::move(y), {x.id(), alpha.id()}, [](Tape<Scalar>& t, int self) {
    const auto& in = t.inputs(self);
    Tensor<Scalar>* dx = t.requires_grad(in[0]) ? &t.grad_buffer(in[0]) : nullptr;
    Scalar* da = t.requires_grad(in[1]) ? t.grad_buffer(in[1]).data() : nullptr;
    kernels::prelu_backward<Scalar>(t.value(in[0]), t.value(in[1]).span(), *t.grad_if_any(self), dx,
                                    da);
  });
}

template <class Scalar>
Var<Scalar> concat_channels(std::span<const Var<Scalar>> parts) {
  srfbn::detail::require<ShapeError>(!parts.empty(), "concat_channels: no parts");
  auto& tape = detail::tape_of(parts.front());
  if (parts.size() == 1) return parts.front();
  std::vector<const Tensor<Scalar>*> values;
  std::vector<int> inputs;
  for (const auto& p : parts) {
    detail::same_tape(parts.front(), p);
    values.push_back(&p.value());
    inputs.push_back(p.id());
  }
  auto y = kernels::concat_channels<Scalar>(values);
  return tape.record(std::move(y), std::move(inputs), [](Tape<Scalar>& t, int self) {
    const auto& dy = *t.grad_if_any(self);
    const std::size_t hw = dy.dims().plane();
    int offset = 0;
    for (int id : t.inputs(self)) {
      const int c = t.value(id).c();
      if (t.requires_grad(id)) {
        auto& dx = t.grad_buffer(id);
        for (int b = 0; b < dy.n(); ++b) {
          const Scalar* src = dy.plane(b, offset);
          Scalar* dst = dx.plane(b, 0);
          for (std::size_t i = 0; i < hw * c; ++i) dst[i] += src[i];
        }
      }
      offset += c;
    }
  });
}

template <class Scalar>
Var<Scalar> concat_channels(const std::vector<Var<Scalar>>& parts) {
  return concat_channels(std::span<const Var<Scalar>>(parts));
}

template <class Scalar>
Var<Scalar> slice_channels(const Var<Scalar>& x, int begin, int count) {
  auto& tape = detail::tape_of(x);
  auto y = kernels::slice_channels(x.value(), begin, count);
  return tape.record(std::move(y), {x.id()}, [begin, count](Tape<Scalar>& t, int self) {
    const int src_id = t.inputs(self)[0];
    const auto& dy = *t.grad_if_any(self);
    auto& dx = t.grad_buffer(src_id);
    const std::size_t hw = dy.dims().plane();
    for (int b = 0; b < dy.n(); ++b) {
      const Scalar* src = dy.plane(b, 0);
      Scalar* dst = dx.plane(b, begin);
      for (std::size_t i = 0; i < hw * count; ++i) dst[i] += src[i];
    }
  });
}

template <class Scalar>
Var<Scalar> add(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a);
  detail::same_tape(a, b);
  Tensor<Scalar> y = a.value();
  y += b.value();
  return tape.record(std::move(y), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
    const auto& dy = *t.grad_if_any(self);
    for (int id : t.inputs(self))
      if (t.requires_grad(id)) t.grad_buffer(id) += dy;
  });
}

template <class Scalar>
Var<Scalar> bilinear_upsample(const Var<Scalar>& x, int scale) {
  auto& tape = detail::tape_of(x);
  auto y = kernels::bilinear_forward(x.value(), scale);
  return tape.record(std::move(y), {x.id()}, [scale](Tape<Scalar>& t, int self) {
    const int src = t.inputs(self)[0];
    kernels::bilinear_backward(*t.grad_if_any(self), scale, t.grad_buffer(src));
  });
}

/// Mean absolute error as a 1x1x1x1 node.
template <class Scalar>
Var<Scalar> l1_loss(const Var<Scalar>& pred, const Var<Scalar>& target) {
  auto& tape = detail::tape_of(pred);
  detail::same_tape(pred, target);
  const double v = kernels::l1_forward(pred.value(), target.value());
  Tensor<Scalar> y(Dims4{1, 1, 1, 1}, static_cast<Scalar>(v));
  return tape.record(std::move(y), {pred.id(), target.id()}, [](Tape<Scalar>& t, int self) {
    const auto& in = t.inputs(self);
    const double up = (*t.grad_if_any(self))[0];
    Tensor<Scalar>* dp = t.requires_grad(in[0]) ? &t.grad_buffer(in[0]) : nullptr;
    Tensor<Scalar>* dt = t.requires_grad(in[1]) ? &t.grad_buffer(in[1]) : nullptr;
    kernels::l1_backward(t.value(in[0]), t.value(in[1]), up, dp, dt);
  });
}

/// sum_i coeffs[i] * scalars[i] for scalar nodes.
template <class Scalar>
Var<Scalar> weighted_sum(const std::vector<Var<Scalar>>& scalars, const std::vector<double>& coeffs) {
  srfbn::detail::require<ShapeError>(!scalars.empty() && scalars.size() == coeffs.size(),
                                     "weighted_sum: length mismatch");
  auto& tape = detail::tape_of(scalars.front());
  double acc = 0.0;
  std::vector<int> inputs;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    detail::same_tape(scalars.front(), scalars[i]);
    srfbn::detail::require<ShapeError>(scalars[i].value().size() == 1,
                                       "weighted_sum: inputs must be scalars");
    acc += coeffs[i] * scalars[i].value()[0];
    inputs.push_back(scalars[i].id());
  }
  Tensor<Scalar> y(Dims4{1, 1, 1, 1}, static_cast<Scalar>(acc));
  return tape.record(std::move(y), std::move(inputs), [coeffs](Tape<Scalar>& t, int self) {
    const double up = (*t.grad_if_any(self))[0];
    const auto& in = t.inputs(self);
    for (std::size_t i = 0; i < in.size(); ++i)
      if (t.requires_grad(in[i])) t.grad_buffer(in[i])[0] += static_cast<Scalar>(coeffs[i] * up);
  });
}

/// Inner product <a, b> as a 1x1x1x1 node.
template <class Scalar>
Var<Scalar> dot(const Var<Scalar>& a, const Var<Scalar>& b) {
  auto& tape = detail::tape_of(a);
  detail::same_tape(a, b);
  Tensor<Scalar> y(Dims4{1, 1, 1, 1}, static_cast<Scalar>(srfbn::dot(a.value(), b.value())));
  return tape.record(std::move(y), {a.id(), b.id()}, [](Tape<Scalar>& t, int self) {
    const Scalar up = (*t.grad_if_any(self))[0];
    const auto& in = t.inputs(self);
    for (int k = 0; k < 2; ++k) {
      if (!t.requires_grad(in[k])) continue;
      const auto& other = t.value(in[1 - k]);
      auto& g = t.grad_buffer(in[k]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * other[i];
    }
  });
}

}  // namespace ag
}  // namespace srfbn
