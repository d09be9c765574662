#pragma once

#include <cmath>
#include <cstdint>

#include "srfbn/error.hpp"
#include "srfbn/weights.hpp"

namespace srfbn {

struct AdamState {
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  WeightSet m;
  WeightSet v;
};

/// One bias-corrected Adam update of `params` in place.
/// Moment buffers are created on the first call.
inline void adam_step(WeightSet& params, const WeightSet& grads, AdamState& state, double lr) {
  detail::require<ConfigError>(lr > 0, "adam_step: learning rate must be positive");
  detail::require<ShapeError>(grads.size() == params.size(),
                              "adam_step: gradient set does not match parameters");
  if (state.m.empty()) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  }
  for (const auto& [id, p] : params) {
    detail::require<ShapeError>(grads.contains(id) && grads.at(id).dims() == p.dims() &&
                                    state.m.at(id).dims() == p.dims(),
                                "adam_step: dims mismatch for " + id);
  }
  state.step += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (auto& [id, p] : params) {
    const auto& g = grads.at(id);
    auto& m = state.m.at(id);
    auto& v = state.v.at(id);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + state.epsilon);
      p[i] = static_cast<float>(p[i] - update);
    }
  }
}

}  // namespace srfbn
