#pragma once

#include <span>
#include <vector>

#include "srfbn/dihedral.hpp"
#include "srfbn/model.hpp"

namespace srfbn {

/// Final-iteration SR image.
inline Tensor4 super_resolve(const Tensor4& lr, const WeightSet& weights, const ModelConfig& cfg) {
  return forward_unrolled(lr, weights, cfg).final_sr();
}

/// Per-iteration means of inverse-transformed outputs over the given dihedral variants.
inline std::vector<Tensor4> self_ensemble_trace(const Tensor4& lr, const WeightSet& weights, const ModelConfig& cfg,
                                                std::span<const int> variants) {
  detail::require<ConfigError>(!variants.empty(), "self_ensemble_infer: empty transform set");
  for (int v : variants) check_variant(v);
  std::vector<std::vector<double>> acc;
  std::vector<Dims4> dims;
  for (int v : variants) {
    const auto trace = forward_unrolled(dihedral_apply(lr, v), weights, cfg);
    for (std::size_t t = 0; t < trace.iterations.size(); ++t) {
      Tensor4 y = dihedral_invert(trace.iterations[t].sr, v);
      if (acc.size() <= t) {
        acc.emplace_back(y.size(), 0.0);
        dims.push_back(y.dims());
      }
      for (std::size_t i = 0; i < y.size(); ++i) acc[t][i] += y[i];
    }
  }
  std::vector<Tensor4> out;
  for (std::size_t t = 0; t < acc.size(); ++t) {
    Tensor4 y(dims[t]);
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] = static_cast<float>(acc[t][i] / static_cast<double>(variants.size()));
    out.push_back(std::move(y));
  }
  return out;
}

/// Mean of inverse-transformed final outputs over the given dihedral variants.
inline Tensor4 self_ensemble_infer(const Tensor4& lr, const WeightSet& weights, const ModelConfig& cfg,
                                   std::span<const int> variants) {
  return self_ensemble_trace(lr, weights, cfg, variants).back();
}

inline std::vector<int> all_dihedral_variants() { return {0, 1, 2, 3, 4, 5, 6, 7}; }

}  // namespace srfbn
