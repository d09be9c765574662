#pragma once

// Fast invariant suite used by `srfbn selfcheck`: gradient checks,
// conv/deconv adjointness, shape laws, parameter counts and the weight-sharing
// and feedforward properties of the unrolled network.

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "srfbn/checkpoint.hpp"
#include "srfbn/gradcheck.hpp"
#include "srfbn/model.hpp"
#include "srfbn/training.hpp"

namespace srfbn {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline Tensor4 uniform_tensor(Dims4 d, std::uint64_t seed, float lo = -1.f, float hi = 1.f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor4 t(d);
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

template <class TapeT>
auto probe(TapeT& tape, const Var<typename TapeT::scalar_type>& y, const Tensor4& r) {
  return ag::dot(y, tape.constant(r.template cast<typename TapeT::scalar_type>()));
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline CheckResult threshold_check(std::string name, double value, double limit) {
  return {std::move(name), value < limit, "worst relative error " + fmt(value) + " (limit " + fmt(limit) + ")"};
}

/// Worst gradient-check error of `make` over a handful of seeds.
template <class Fn>
double worst_over_seeds(int count, std::uint64_t base, Fn&& make) {
  double worst = 0.0;
  for (int i = 0; i < count; ++i) worst = std::max(worst, make(base + 10 * i));
  return worst;
}

inline ModelConfig micro_config() {
  ModelConfig c;
  c.scale = 2;
  c.T = 2;
  c.G = 2;
  c.m = 4;
  return c;
}

}  // namespace detail

inline std::vector<CheckResult> gradient_selfchecks() {
  using detail::probe;
  using detail::uniform_tensor;
  constexpr double kTol = 1e-4;
  std::vector<CheckResult> out;

  const ConvGeometry conv_geoms[] = {{3, 1, 1}, {6, 2, 2}, {7, 3, 2}, {8, 4, 2}, {1, 1, 0}};
  out.push_back(detail::threshold_check("grad conv2d", detail::worst_over_seeds(5, 1, [&](std::uint64_t s) {
    const auto& g = conv_geoms[(s / 10) % 5];
    auto x = uniform_tensor({1, 2, 9, 8}, s), w = uniform_tensor({3, 2, g.k, g.k}, s + 1);
    auto b = uniform_tensor({3, 1, 1, 1}, s + 2);
    auto r = uniform_tensor(kernels::conv2d_dims(x.dims(), 3, g), s + 3);
    return gradient_check([&](auto& t, const auto& v) { return probe(t, ag::conv2d(v[0], v[1], v[2], g), r); },
                          {x, w, b}, {true, true, true}).worst();
  }), kTol));

  out.push_back(detail::threshold_check("grad deconv2d", detail::worst_over_seeds(5, 2, [&](std::uint64_t s) {
    const auto& g = conv_geoms[(s / 10) % 4 + 1];
    auto x = uniform_tensor({1, 2, 3, 4}, s), w = uniform_tensor({2, 3, g.k, g.k}, s + 1);
    auto b = uniform_tensor({3, 1, 1, 1}, s + 2);
    auto r = uniform_tensor(kernels::deconv2d_dims(x.dims(), 3, g), s + 3);
    return gradient_check([&](auto& t, const auto& v) { return probe(t, ag::deconv2d(v[0], v[1], v[2], g), r); },
                          {x, w, b}, {true, true, true}).worst();
  }), kTol));

  out.push_back(detail::threshold_check("grad prelu", detail::worst_over_seeds(5, 3, [&](std::uint64_t s) {
    // Keep inputs away from the kink so the central difference is exact.
    auto x = uniform_tensor({2, 3, 4, 5}, s, 0.05f, 1.f);
    std::mt19937_64 signs(s);
    for (auto& v : x.storage()) v *= (signs() & 1) ? 1.f : -1.f;
    auto a = uniform_tensor({3, 1, 1, 1}, s + 1, 0.f, 0.5f);
    auto r = uniform_tensor(x.dims(), s + 2);
    return gradient_check([&](auto& t, const auto& v) { return probe(t, ag::prelu(v[0], v[1]), r); }, {x, a},
                          {true, true}).worst();
  }), kTol));

  out.push_back(detail::threshold_check("grad concat_channels", detail::worst_over_seeds(5, 4, [&](std::uint64_t s) {
    auto a = uniform_tensor({2, 1, 3, 4}, s), b = uniform_tensor({2, 3, 3, 4}, s + 1);
    auto r = uniform_tensor({2, 4, 3, 4}, s + 2);
    return gradient_check(
        [&](auto& t, const auto& v) { return probe(t, ag::concat_channels(std::vector{v[0], v[1]}), r); },
        {a, b}, {true, true}).worst();
  }), kTol));

  out.push_back(detail::threshold_check("grad bilinear_upsample", detail::worst_over_seeds(5, 5, [&](std::uint64_t s) {
    const int scale = 2 + static_cast<int>((s / 10) % 3);
    auto x = uniform_tensor({1, 2, 4, 3}, s);
    auto r = uniform_tensor({1, 2, 4 * scale, 3 * scale}, s + 1);
    return gradient_check([&](auto& t, const auto& v) { return probe(t, ag::bilinear_upsample(v[0], scale), r); },
                          {x}, {true}).worst();
  }), kTol));

  out.push_back(detail::threshold_check("grad l1_loss", detail::worst_over_seeds(5, 6, [&](std::uint64_t s) {
    auto p = uniform_tensor({1, 3, 4, 4}, s, 0.f, 1.f);
    auto q = p;
    std::mt19937_64 signs(s);
    for (auto& v : q.storage()) v += (signs() & 1) ? 0.1f : -0.1f;
    return gradient_check([&](auto&, const auto& v) { return ag::l1_loss(v[0], v[1]); }, {p, q},
                          {true, true}).worst();
  }), kTol));

  {
    const auto cfg = detail::micro_config();
    const auto w = build_model(cfg, 21);
    auto lr = uniform_tensor({1, 3, 8, 8}, 22, 0.f, 1.f);
    auto hr = uniform_tensor({1, 3, 16, 16}, 23, 0.f, 1.f);
    std::vector<std::string> ids;
    std::vector<Tensor4> inputs;
    for (const auto& [id, t] : w) {
      ids.push_back(id);
      inputs.push_back(t);
    }
    inputs.push_back(lr);
    std::vector<bool> check(inputs.size(), true);
    check.back() = false;
    const auto res = gradient_check(
        [&](auto& tape, const auto& v) {
          using S = typename std::decay_t<decltype(tape)>::scalar_type;
          ParamBinding<S> p(tape, ids, std::vector<Var<S>>(v.begin(), v.end() - 1));
          auto trace = forward_unrolled(v.back(), p, cfg);
          std::vector<Var<S>> sr, tg;
          for (const auto& it : trace) {
            sr.push_back(it.sr);
            tg.push_back(tape.constant(hr.template cast<S>()));
          }
          return multi_output_loss(sr, tg, {1.0, 1.0}, false);
        },
        inputs, check, 1e-5);
    out.push_back(detail::threshold_check("grad end-to-end micro model", res.worst(), 1e-3));
  }
  return out;
}

inline CheckResult adjointness_selfcheck() {
  // <conv(x), y> == <x, deconv(y)> with a shared weight tensor.
  double worst = 0.0;
  const ConvGeometry geoms[] = {{6, 2, 2}, {7, 3, 2}, {8, 4, 2}, {3, 1, 1}};
  std::uint64_t seed = 300;
  for (const auto& g : geoms) {
    const int h = g.stride * 5, w = g.stride * 4;
    auto x = detail::uniform_tensor({1, 3, h, w}, seed++);
    auto wt = detail::uniform_tensor({2, 3, g.k, g.k}, seed++);
    const auto y = detail::uniform_tensor(kernels::conv2d_dims(x.dims(), 2, g), seed++);
    auto cp = ConvParams::conv(3, 2, g);
    cp.weights = wt;
    auto dp = ConvParams::deconv(2, 3, g);
    dp.weights = wt;
    const auto cx = conv2d(x, cp);
    const auto dy = deconv2d(y, dp);
    if (dy.dims() != x.dims()) return {"conv/deconv adjointness", false, "shape mismatch " + dy.dims().str()};
    const double lhs = dot(cx, y), rhs = dot(x, dy);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  return {"conv/deconv adjointness", worst < 1e-5, "worst relative gap " + detail::fmt(worst)};
}

inline CheckResult shape_law_selfcheck() {
  for (int scale : {2, 3, 4})
    for (auto [h, w] : {std::pair{7, 11}, std::pair{16, 16}, std::pair{23, 9}}) {
      auto cfg = detail::micro_config();
      cfg.scale = scale;
      const auto trace = forward_unrolled(detail::uniform_tensor({1, 3, h, w}, 1, 0.f, 1.f), build_model(cfg, 1), cfg);
      for (const auto& it : trace.iterations)
        if (it.sr.dims() != Dims4{1, 3, scale * h, scale * w})
          return {"shape law", false, "scale " + std::to_string(scale) + " gave " + it.sr.dims().str()};
    }
  return {"shape law", true, "scales 2,3,4 on 7x11, 16x16, 23x9"};
}

inline std::vector<CheckResult> parameter_count_selfchecks() {
  std::vector<CheckResult> out;
  struct Case {
    const char* name;
    int G, m;
    double expected;
  };
  for (const auto& c : {Case{"parameter count SRFBN-S", 3, 32, 483000.0}, Case{"parameter count SRFBN", 6, 64, 3631000.0}}) {
    ModelConfig cfg;
    cfg.scale = 4;
    cfg.T = 4;
    cfg.G = c.G;
    cfg.m = c.m;
    const double got = static_cast<double>(parameter_count(cfg));
    const double rel = std::abs(got - c.expected) / c.expected;
    out.push_back({c.name, rel <= 0.03,
                   "expected " + detail::fmt(c.expected / 1000) + "K, computed " + std::to_string(std::int64_t(got)) +
                       " (" + detail::fmt(rel * 100) + "% off)"});
  }
  return out;
}

inline CheckResult weight_sharing_selfcheck() {
  std::vector<std::size_t> sizes, counts;
  for (int T : {1, 2, 4}) {
    auto cfg = detail::micro_config();
    cfg.T = T;
    const auto w = build_model(cfg, 5);
    sizes.push_back(serialize_checkpoint(w, cfg).size());
    counts.push_back(w.parameter_count());
  }
  const bool ok = sizes[0] == sizes[1] && sizes[1] == sizes[2] && counts[0] == counts[2];
  return {"weight sharing", ok,
          "checkpoint bytes " + std::to_string(sizes[0]) + "/" + std::to_string(sizes[1]) + "/" +
              std::to_string(sizes[2]) + " for T=1/2/4"};
}

inline CheckResult feedforward_selfcheck() {
  auto cfg = detail::micro_config();
  cfg.T = 3;
  cfg.tie_loss_every_iteration = false;
  const auto w = build_model(cfg, 4);
  Tape<float> tape;
  ParamBinding<float> p(tape, w, true);
  auto trace = forward_unrolled(tape.constant(detail::uniform_tensor({1, 3, 8, 8}, 5, 0.f, 1.f)), p, cfg);
  const auto hr = detail::uniform_tensor({1, 3, 16, 16}, 6, 0.f, 1.f);
  std::vector<Var<float>> sr, tg;
  for (const auto& it : trace) {
    sr.push_back(it.sr);
    tg.push_back(tape.constant(hr));
  }
  tape.backward(multi_output_loss(sr, tg, {1, 1, 1}, true));
  double early = 0.0;
  for (int t = 0; t + 1 < cfg.T; ++t) {
    const Tensor4 g = tape.grad(trace[t].residual);
    early = std::max(early, max_abs_diff(g, Tensor4(g.dims())));
  }
  const Tensor4 last = tape.grad(trace.back().residual);
  const double last_mag = max_abs_diff(last, Tensor4(last.dims()));
  return {"feedforward ablation gradient", early == 0.0 && last_mag > 0.0,
          "max |dL/dI_Res^t| for t<T: " + detail::fmt(early) + ", at T: " + detail::fmt(last_mag)};
}

/// Every check, in a fixed order.
inline std::vector<CheckResult> run_selfchecks() {
  std::vector<CheckResult> all = gradient_selfchecks();
  all.push_back(adjointness_selfcheck());
  all.push_back(shape_law_selfcheck());
  for (auto& c : parameter_count_selfchecks()) all.push_back(std::move(c));
  all.push_back(weight_sharing_selfcheck());
  all.push_back(feedforward_selfcheck());
  return all;
}

}  // namespace srfbn
