#pragma once

// The feedback super-resolution network: LR feature extraction block (LRFB),
// feedback block (FB) of G densely connected up/down projection groups,
// reconstruction block (RB), and the bilinear global residual. The network is
// unrolled for T iterations; F_out of iteration t is fed back into the FB of
// iteration t + 1.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "srfbn/autograd.hpp"
#include "srfbn/error.hpp"
#include "srfbn/ops.hpp"
#include "srfbn/tensor.hpp"
#include "srfbn/weights.hpp"

namespace srfbn {

struct ModelConfig {
  int scale = 4;
  int T = 4;
  int G = 3;
  int m = 32;
  int c_in = 3;
  int c_out = 3;
  bool share_weights = true;
  bool tie_loss_every_iteration = true;
  bool lr_input_every_iteration = true;
  bool use_udsl = true;
  bool use_dsc = true;

  bool operator==(const ModelConfig&) const = default;

  /// (k, stride, pad) of the up/down projection layers for this scale.
  ConvGeometry projection() const {
    switch (scale) {
      case 2: return {6, 2, 2};
      case 3: return {7, 3, 2};
      case 4: return {8, 4, 2};
      default: throw ConfigError("unsupported scale " + std::to_string(scale));
    }
  }

  void validate() const {
    detail::require<ConfigError>(scale == 2 || scale == 3 || scale == 4,
                                 "scale must be 2, 3 or 4, got " + std::to_string(scale));
    detail::require<ConfigError>(T >= 1, "T must be >= 1");
    detail::require<ConfigError>(G >= 1, "G must be >= 1");
    detail::require<ConfigError>(m >= 1, "m must be >= 1");
    detail::require<ConfigError>(c_in == 1 || c_in == 3, "c_in must be 1 or 3");
    detail::require<ConfigError>(c_out == 1 || c_out == 3, "c_out must be 1 or 3");
    detail::require<ConfigError>(c_out == c_in,
                                 "c_out must equal c_in so the upsampled input can be added");
  }
};

/// One conv or deconv layer of a single unrolled iteration.
struct LayerSpec {
  std::string name;
  bool transposed = false;
  int c_in = 0;
  int c_out = 0;
  ConvGeometry geom;
  bool activation = true;

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(c_in) * c_out * geom.k * geom.k + c_out +
           (activation ? c_out : 0);
  }
};

/// Layers of one iteration in a fixed order.
inline std::vector<LayerSpec> layer_inventory(const ModelConfig& cfg) {
  cfg.validate();
  const int m = cfg.m;
  const ConvGeometry one{1, 1, 0};
  const ConvGeometry three{3, 1, 1};
  const ConvGeometry proj = cfg.projection();
  std::vector<LayerSpec> layers;
  layers.push_back({"lrfb.conv3", false, cfg.c_in, 4 * m, three, true});
  layers.push_back({"lrfb.conv1", false, 4 * m, m, one, true});
  layers.push_back({"fb.compress_in", false, 2 * m, m, one, true});
  for (int g = 1; g <= cfg.G; ++g) {
    const std::string group = "fb.group" + std::to_string(g);
    const int fan = cfg.use_dsc ? g * m : m;
    if (g > 1) layers.push_back({group + ".up_compress", false, fan, m, one, true});
    if (cfg.use_udsl)
      layers.push_back({group + ".up", true, m, m, proj, true});
    else
      layers.push_back({group + ".up", false, m, m, three, true});
    if (g > 1) layers.push_back({group + ".down_compress", false, fan, m, one, true});
    layers.push_back({group + ".down", false, m, m, cfg.use_udsl ? proj : three, true});
  }
  layers.push_back({"fb.fuse", false, cfg.use_dsc ? cfg.G * m : m, m, one, true});
  layers.push_back({"rb.deconv", true, m, m, proj, true});
  layers.push_back({"rb.conv3", false, m, cfg.c_out, three, false});
  return layers;
}

/// Identifier prefix of iteration t (1-based).
inline std::string iteration_prefix(const ModelConfig& cfg, int t) {
  return cfg.share_weights ? std::string() : "iter" + std::to_string(t) + ".";
}

inline int weight_copies(const ModelConfig& cfg) { return cfg.share_weights ? 1 : cfg.T; }

inline std::size_t parameter_count(const ModelConfig& cfg) {
  std::size_t per_copy = 0;
  for (const auto& layer : layer_inventory(cfg)) per_copy += layer.parameter_count();
  return per_copy * weight_copies(cfg);
}

/// Fresh parameters: He-normal conv/deconv weights (fan-in = c_in*k*k), zero
/// biases, PReLU slopes 0.25. Deterministic given seed.
inline WeightSet build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  WeightSet ws;
  const auto layers = layer_inventory(cfg);
  for (int copy = 1; copy <= weight_copies(cfg); ++copy) {
    const std::string prefix = iteration_prefix(cfg, copy);
    for (const auto& layer : layers) {
      const Dims4 wd = layer.transposed ? Dims4{layer.c_in, layer.c_out, layer.geom.k, layer.geom.k}
                                        : Dims4{layer.c_out, layer.c_in, layer.geom.k, layer.geom.k};
      const double fan_in = static_cast<double>(layer.c_in) * layer.geom.k * layer.geom.k;
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / fan_in));
      Tensor4 w(wd);
      for (auto& v : w.storage()) v = static_cast<float>(normal(rng));
      ws.add(prefix + layer.name + ".weight", std::move(w));
      ws.add(prefix + layer.name + ".bias", Tensor4(Dims4{layer.c_out, 1, 1, 1}));
      if (layer.activation)
        ws.add(prefix + layer.name + ".alpha", Tensor4(Dims4{layer.c_out, 1, 1, 1}, 0.25f));
    }
  }
  return ws;
}

/// Parameters of a WeightSet placed on a tape as leaves (or constants).
template <class Scalar>
class ParamBinding {
 public:
  ParamBinding(Tape<Scalar>& tape, const BasicWeightSet<Scalar>& weights, bool trainable)
      : tape_(&tape) {
    for (const auto& [id, t] : weights) {
      vars_.emplace(id, trainable ? tape.leaf(t) : tape.constant(t));
      order_.push_back(id);
    }
  }

  /// Binds already-recorded variables under the given identifiers.
  ParamBinding(Tape<Scalar>& tape, const std::vector<std::string>& ids, const std::vector<Var<Scalar>>& vars)
      : tape_(&tape) {
    detail::require<ShapeError>(ids.size() == vars.size(), "ParamBinding: ids/vars length mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      vars_.emplace(ids[i], vars[i]);
      order_.push_back(ids[i]);
    }
  }

  const Var<Scalar>& operator[](const std::string& id) const {
    auto it = vars_.find(id);
    detail::require<ConfigError>(it != vars_.end(), "missing parameter " + id);
    return it->second;
  }
  bool contains(const std::string& id) const { return vars_.contains(id); }

  /// Gradients currently held on the tape, one entry per parameter.
  BasicWeightSet<Scalar> gradients() const {
    BasicWeightSet<Scalar> out;
    for (const auto& id : order_) out.add(id, tape_->grad(vars_.at(id)));
    return out;
  }

 private:
  Tape<Scalar>* tape_;
  std::unordered_map<std::string, Var<Scalar>> vars_;
  std::vector<std::string> order_;
};

namespace detail {

template <class Scalar>
Var<Scalar> apply_layer(const ParamBinding<Scalar>& p, const std::string& prefix, const LayerSpec& spec,
                        const Var<Scalar>& x) {
  require<ShapeError>(x.dims().c == spec.c_in, spec.name + ": input has " +
                                                   std::to_string(x.dims().c) + " channels, expected " +
                                                   std::to_string(spec.c_in));
  const std::string base = prefix + spec.name;
  Var<Scalar> y = spec.transposed ? ag::deconv2d(x, p[base + ".weight"], p[base + ".bias"], spec.geom)
                                  : ag::conv2d(x, p[base + ".weight"], p[base + ".bias"], spec.geom);
  if (spec.activation) y = ag::prelu(y, p[base + ".alpha"]);
  return y;
}

/// Inventory lookup by layer name.
class LayerTable {
 public:
  explicit LayerTable(const ModelConfig& cfg) {
    for (auto& l : layer_inventory(cfg)) table_.emplace(l.name, l);
  }
  const LayerSpec& operator()(const std::string& name) const { return table_.at(name); }

 private:
  std::unordered_map<std::string, LayerSpec> table_;
};

}  // namespace detail

template <class Scalar>
Var<Scalar> lr_feature_block(const Var<Scalar>& lr, const ParamBinding<Scalar>& p, const ModelConfig& cfg,
                             const std::string& prefix = "") {
  detail::require<ShapeError>(lr.dims().c == cfg.c_in, "LR input has " + std::to_string(lr.dims().c) +
                                                           " channels, expected " +
                                                           std::to_string(cfg.c_in));
  detail::LayerTable layers(cfg);
  auto x = detail::apply_layer(p, prefix, layers("lrfb.conv3"), lr);
  return detail::apply_layer(p, prefix, layers("lrfb.conv1"), x);
}

/// Intermediate maps of one feedback block evaluation.
template <class Scalar>
struct FeedbackOutput {
  Var<Scalar> out;             // F_out
  Var<Scalar> refined;         // L_0
  std::vector<Var<Scalar>> hr; // H_1..H_G
  std::vector<Var<Scalar>> lr; // L_1..L_G
  std::vector<int> up_input_channels;    // channels entering each up layer (after compression)
  std::vector<int> down_input_channels;
  std::vector<int> up_concat_channels;   // channels of the concatenation before compression
  std::vector<int> down_concat_channels;
};

template <class Scalar>
FeedbackOutput<Scalar> feedback_block(const Var<Scalar>& f_in, const Var<Scalar>& f_prev,
                                      const ParamBinding<Scalar>& p, const ModelConfig& cfg,
                                      const std::string& prefix = "") {
  detail::require<ShapeError>(f_in.dims() == f_prev.dims(),
                              "feedback_block: F_in " + f_in.dims().str() + " vs F_out^{t-1} " +
                                  f_prev.dims().str());
  detail::require<ShapeError>(f_in.dims().c == cfg.m, "feedback_block: expected m channels");
  detail::LayerTable layers(cfg);
  FeedbackOutput<Scalar> r;
  std::vector<Var<Scalar>> pair{f_prev, f_in};
  r.refined = detail::apply_layer(p, prefix, layers("fb.compress_in"), ag::concat_channels(pair));

  std::vector<Var<Scalar>> lr_feats{r.refined};
  for (int g = 1; g <= cfg.G; ++g) {
    const std::string group = "fb.group" + std::to_string(g);
    std::vector<Var<Scalar>> up_in = cfg.use_dsc ? lr_feats : std::vector<Var<Scalar>>{lr_feats.back()};
    Var<Scalar> x = ag::concat_channels(up_in);
    r.up_concat_channels.push_back(x.dims().c);
    if (g > 1) x = detail::apply_layer(p, prefix, layers(group + ".up_compress"), x);
    r.up_input_channels.push_back(x.dims().c);
    r.hr.push_back(detail::apply_layer(p, prefix, layers(group + ".up"), x));

    std::vector<Var<Scalar>> down_in = cfg.use_dsc ? r.hr : std::vector<Var<Scalar>>{r.hr.back()};
    Var<Scalar> h = ag::concat_channels(down_in);
    r.down_concat_channels.push_back(h.dims().c);
    if (g > 1) h = detail::apply_layer(p, prefix, layers(group + ".down_compress"), h);
    r.down_input_channels.push_back(h.dims().c);
    Var<Scalar> l = detail::apply_layer(p, prefix, layers(group + ".down"), h);
    r.lr.push_back(l);
    lr_feats.push_back(l);
  }
  std::vector<Var<Scalar>> fuse_in = cfg.use_dsc ? r.lr : std::vector<Var<Scalar>>{r.lr.back()};
  r.out = detail::apply_layer(p, prefix, layers("fb.fuse"), ag::concat_channels(fuse_in));
  return r;
}

template <class Scalar>
Var<Scalar> reconstruction_block(const Var<Scalar>& f_out, const ParamBinding<Scalar>& p,
                                 const ModelConfig& cfg, const std::string& prefix = "") {
  detail::require<ShapeError>(f_out.dims().c == cfg.m, "reconstruction_block: expected m channels");
  detail::LayerTable layers(cfg);
  auto up = detail::apply_layer(p, prefix, layers("rb.deconv"), f_out);
  return detail::apply_layer(p, prefix, layers("rb.conv3"), up);
}

template <class Scalar>
struct IterationVars {
  Var<Scalar> f_in;
  Var<Scalar> f_out;
  Var<Scalar> refined;  // L_0
  Var<Scalar> residual; // I_Res
  Var<Scalar> sr;       // I_SR
};

/// T-iteration unrolled forward pass recorded on `lr`'s tape.
template <class Scalar>
std::vector<IterationVars<Scalar>> forward_unrolled(const Var<Scalar>& lr, const ParamBinding<Scalar>& p,
                                                    const ModelConfig& cfg) {
  cfg.validate();
  detail::require<ShapeError>(lr.dims().c == cfg.c_in && lr.dims().h >= 1 && lr.dims().w >= 1,
                              "forward_unrolled: invalid LR dims " + lr.dims().str());
  auto& tape = *lr.tape();
  const Var<Scalar> upsampled = ag::bilinear_upsample(lr, cfg.scale);
  std::vector<IterationVars<Scalar>> trace;
  Var<Scalar> f_prev;
  for (int t = 1; t <= cfg.T; ++t) {
    const std::string prefix = iteration_prefix(cfg, t);
    IterationVars<Scalar> it;
    if (t == 1 || cfg.lr_input_every_iteration) {
      it.f_in = lr_feature_block(lr, p, cfg, prefix);
    } else {
      it.f_in = tape.constant(Tensor<Scalar>(trace.front().f_in.dims()));
    }
    if (t == 1) f_prev = it.f_in;
    auto fb = feedback_block(it.f_in, f_prev, p, cfg, prefix);
    it.f_out = fb.out;
    it.refined = fb.refined;
    it.residual = reconstruction_block(it.f_out, p, cfg, prefix);
    it.sr = ag::add(it.residual, upsampled);
    f_prev = it.f_out;
    trace.push_back(it);
  }
  return trace;
}

/// Per-iteration values of one forward pass.
struct IterationRecord {
  Tensor4 f_in;
  Tensor4 f_out;
  Tensor4 refined;
  Tensor4 residual;
  Tensor4 sr;
};

struct ForwardTrace {
  std::vector<IterationRecord> iterations;

  const Tensor4& final_sr() const { return iterations.back().sr; }
};

inline ForwardTrace forward_unrolled(const Tensor4& lr, const WeightSet& weights, const ModelConfig& cfg) {
  Tape<float> tape;
  ParamBinding<float> p(tape, weights, false);
  auto vars = forward_unrolled(tape.constant(lr), p, cfg);
  ForwardTrace trace;
  for (const auto& v : vars)
    trace.iterations.push_back({v.f_in.value(), v.f_out.value(), v.refined.value(), v.residual.value(),
                                v.sr.value()});
  return trace;
}

inline Tensor4 lr_feature_block(const Tensor4& lr, const WeightSet& weights, const ModelConfig& cfg) {
  Tape<float> tape;
  ParamBinding<float> p(tape, weights, false);
  return lr_feature_block(tape.constant(lr), p, cfg, iteration_prefix(cfg, 1)).value();
}

inline Tensor4 feedback_block(const Tensor4& f_in, const Tensor4& f_prev, const WeightSet& weights,
                              const ModelConfig& cfg) {
  Tape<float> tape;
  ParamBinding<float> p(tape, weights, false);
  return feedback_block(tape.constant(f_in), tape.constant(f_prev), p, cfg, iteration_prefix(cfg, 1))
      .out.value();
}

inline Tensor4 reconstruction_block(const Tensor4& f_out, const WeightSet& weights, const ModelConfig& cfg) {
  Tape<float> tape;
  ParamBinding<float> p(tape, weights, false);
  return reconstruction_block(tape.constant(f_out), p, cfg, iteration_prefix(cfg, 1)).value();
}

}  // namespace srfbn
