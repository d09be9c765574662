#pragma once

// Central finite-difference gradient checking. The analytic gradient comes
// from the float tape; the numerical one re-evaluates the same expression in
// double precision with each input element perturbed by +-h.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "srfbn/autograd.hpp"
#include "srfbn/tensor.hpp"

namespace srfbn {

/// ||a - b|| / max(||a||, ||b||), with 0 when both vanish.
template <class A, class B>
double relative_error(const Tensor<A>& a, const Tensor<B>& b) {
  detail::require<ShapeError>(a.dims() == b.dims(), "relative_error: dims mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i], y = b[i];
    diff += (x - y) * (x - y);
    na += x * x;
    nb += y * y;
  }
  const double denom = std::sqrt(std::max(na, nb));
  return denom == 0 ? 0.0 : std::sqrt(diff) / denom;
}

struct GradCheckResult {
  std::vector<double> errors;  // one per checked input
  double worst() const { return errors.empty() ? 0.0 : *std::max_element(errors.begin(), errors.end()); }
};

/// `fn` is a generic callable (Tape<S>&, const std::vector<Var<S>>&) -> Var<S>
/// producing a scalar. Inputs flagged in `check` are differentiated.
template <class Fn>
GradCheckResult gradient_check(Fn&& fn, const std::vector<Tensor4>& inputs, const std::vector<bool>& check,
                               double h = 1e-3) {
  Tape<float> tape;
  std::vector<Var<float>> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    vars.push_back(check[i] ? tape.leaf(inputs[i]) : tape.constant(inputs[i]));
  const Var<float> root = fn(tape, vars);
  tape.backward(root);

  std::vector<Tensor<double>> shadow;
  for (const auto& t : inputs) shadow.push_back(t.cast<double>());
  auto eval = [&]() {
    Tape<double> dt;
    std::vector<Var<double>> dv;
    for (const auto& t : shadow) dv.push_back(dt.constant(t));
    return fn(dt, dv).value()[0];
  };

  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!check[i]) continue;
    const Tensor4 analytic = tape.grad(vars[i]);
    Tensor<double> numeric(inputs[i].dims());
    for (std::size_t j = 0; j < shadow[i].size(); ++j) {
      const double orig = shadow[i][j];
      shadow[i][j] = orig + h;
      const double up = eval();
      shadow[i][j] = orig - h;
      const double down = eval();
      shadow[i][j] = orig;
      numeric[j] = (up - down) / (2 * h);
    }
    result.errors.push_back(relative_error(analytic, numeric));
  }
  return result;
}

}  // namespace srfbn
