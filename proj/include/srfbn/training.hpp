#pragma once

// Curriculum targets, the tied multi-output L1 objective, and the Adam
// training loop with step-decay learning rate.

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "srfbn/adam.hpp"
#include "srfbn/autograd.hpp"
#include "srfbn/degradation.hpp"
#include "srfbn/model.hpp"

namespace srfbn {

enum class TargetKind { Original, Blurred, Noisy };

struct CurriculumSchedule {
  std::vector<TargetKind> rules;  // one per iteration

  /// BI: all original. BD/DN: the easy target for the first ceil(T/2) iterations.
  static CurriculumSchedule for_degradation(DegradationKind kind, int T) {
    detail::require<ConfigError>(T >= 1, "curriculum: T must be >= 1");
    CurriculumSchedule s;
    const int easy = (T + 1) / 2;
    for (int t = 1; t <= T; ++t) {
      TargetKind k = TargetKind::Original;
      if (t <= easy && kind == DegradationKind::BD) k = TargetKind::Blurred;
      if (t <= easy && kind == DegradationKind::DN) k = TargetKind::Noisy;
      s.rules.push_back(k);
    }
    return s;
  }
};

/// Per-iteration HR targets. Blurred targets use the BD kernel, noisy ones the DN noise level.
inline std::vector<Tensor4> curriculum_targets(const Tensor4& hr, const DegradationSpec& spec, int T,
                                               std::uint64_t seed) {
  const auto schedule = CurriculumSchedule::for_degradation(spec.kind, T);
  std::optional<Tensor4> blurred, noisy;
  std::vector<Tensor4> targets;
  for (TargetKind k : schedule.rules) {
    switch (k) {
      case TargetKind::Original:
        targets.push_back(hr);
        break;
      case TargetKind::Blurred:
        if (!blurred) blurred = gaussian_blur(hr, spec.blur_kernel_size, spec.blur_sigma);
        targets.push_back(*blurred);
        break;
      case TargetKind::Noisy:
        if (!noisy) noisy = add_gaussian_noise(hr, spec.noise_sigma, seed);
        targets.push_back(*noisy);
        break;
    }
  }
  return targets;
}

/// (1/T) sum_t W^t L1(sr_t, target_t). With `last_only`, just W^T L1(sr_T, target_T).
template <class Scalar>
Var<Scalar> multi_output_loss(const std::vector<Var<Scalar>>& sr, const std::vector<Var<Scalar>>& targets,
                              const std::vector<double>& loss_weights, bool last_only,
                              std::vector<Var<Scalar>>* per_iteration = nullptr) {
  const std::size_t T = sr.size();
  detail::require<ShapeError>(T >= 1 && targets.size() == T && loss_weights.size() == T,
                              "multi_output_loss: outputs, targets and weights must all have length T");
  std::vector<Var<Scalar>> terms;
  std::vector<double> coeffs;
  for (std::size_t t = 0; t < T; ++t) {
    auto l = ag::l1_loss(sr[t], targets[t]);
    if (per_iteration) per_iteration->push_back(l);
    if (last_only && t + 1 != T) continue;
    terms.push_back(l);
    coeffs.push_back(last_only ? loss_weights[t] : loss_weights[t] / static_cast<double>(T));
  }
  return ag::weighted_sum(terms, coeffs);
}

/// Value of the objective for precomputed outputs.
inline double multi_output_loss(const ForwardTrace& trace, const std::vector<Tensor4>& targets,
                                const std::vector<double>& loss_weights, bool last_only = false) {
  Tape<float> tape;
  std::vector<Var<float>> sr, tg;
  for (const auto& it : trace.iterations) sr.push_back(tape.constant(it.sr));
  for (const auto& t : targets) tg.push_back(tape.constant(t));
  return multi_output_loss(sr, tg, loss_weights, last_only).value()[0];
}

struct TrainingConfig {
  int batch_size = 16;
  double lr0 = 1e-4;
  double lr_decay_factor = 0.5;
  int lr_decay_period_epochs = 200;
  int epochs = 1;
  int patches_per_epoch = 16;
  std::vector<double> loss_weights;  // empty: 1 for every iteration
  std::uint64_t seed = 0;            // sampling, noise and init
  int lr_patch = 0;                  // 0: scale default
  bool augment = true;
  int checkpoint_every_epochs = 0;

  void validate(const ModelConfig& model) const {
    detail::require<ConfigError>(batch_size >= 1, "batch_size must be >= 1");
    detail::require<ConfigError>(lr0 > 0, "lr0 must be positive");
    detail::require<ConfigError>(lr_decay_factor > 0, "lr_decay_factor must be positive");
    detail::require<ConfigError>(lr_decay_period_epochs >= 1, "lr_decay_period_epochs must be >= 1");
    detail::require<ConfigError>(epochs >= 0, "epochs must be >= 0");
    detail::require<ConfigError>(patches_per_epoch >= 1, "patches_per_epoch must be >= 1");
    detail::require<ConfigError>(lr_patch >= 0, "lr_patch must be >= 0");
    detail::require<ConfigError>(loss_weights.empty() || static_cast<int>(loss_weights.size()) == model.T,
                                 "loss_weights must have T entries");
  }
  int steps_per_epoch() const { return std::max(1, patches_per_epoch / batch_size); }
  int patch_for(int scale) const { return lr_patch > 0 ? lr_patch : default_lr_patch(scale); }
  std::vector<double> weights_for(int T) const {
    return loss_weights.empty() ? std::vector<double>(T, 1.0) : loss_weights;
  }
};

/// lr0 * factor^floor(epoch / period).
inline double lr_at_epoch(int epoch, const TrainingConfig& cfg) {
  detail::require<ConfigError>(epoch >= 0, "lr_at_epoch: negative epoch");
  return cfg.lr0 * std::pow(cfg.lr_decay_factor, epoch / cfg.lr_decay_period_epochs);
}

struct StepRecord {
  int epoch = 0;
  int step = 0;  // global, 0-based
  double lr = 0;
  double loss = 0;
  std::vector<double> per_iteration;  // unweighted L1 of each output
};

struct TrainResult {
  WeightSet weights;
  std::vector<StepRecord> history;
  std::vector<double> epoch_mean_loss;

  std::string history_csv() const {
    std::ostringstream os;
    os << "epoch,step,lr,loss_total";
    const std::size_t T = history.empty() ? 0 : history.front().per_iteration.size();
    for (std::size_t t = 1; t <= T; ++t) os << ",loss_t" << t;
    os << '\n' << std::setprecision(9);
    for (const auto& r : history) {
      os << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss;
      for (double v : r.per_iteration) os << ',' << v;
      os << '\n';
    }
    return os.str();
  }
};

struct TrainHooks {
  std::function<void(int epoch, const WeightSet&)> on_epoch_end;
  std::function<void(const StepRecord&)> on_step;
};

inline void check_weights_match(const WeightSet& weights, const ModelConfig& cfg) {
  const WeightSet ref = build_model(cfg, 0);
  detail::require<ConfigError>(ref.size() == weights.size(), "weights do not match the model configuration");
  for (const auto& [id, t] : ref)
    detail::require<ConfigError>(weights.contains(id) && weights.at(id).dims() == t.dims(),
                                 "weights do not match the model configuration at " + id);
}

/// Gradient of the training objective for one batch. Exposed for tests.
struct BatchGradient {
  double loss = 0;
  std::vector<double> per_iteration;
  WeightSet grads;
};

inline BatchGradient batch_gradient(const WeightSet& weights, const ModelConfig& cfg, const Tensor4& lr_batch,
                                    const std::vector<Tensor4>& targets, const std::vector<double>& loss_weights) {
  Tape<float> tape;
  ParamBinding<float> params(tape, weights, true);
  auto trace = forward_unrolled(tape.constant(lr_batch), params, cfg);
  std::vector<Var<float>> sr, tg, per_it;
  for (const auto& it : trace) sr.push_back(it.sr);
  for (const auto& t : targets) tg.push_back(tape.constant(t));
  auto loss = multi_output_loss(sr, tg, loss_weights, !cfg.tie_loss_every_iteration, &per_it);
  BatchGradient out;
  out.loss = loss.value()[0];
  for (const auto& v : per_it) out.per_iteration.push_back(v.value()[0]);
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite training loss");
  tape.backward(loss);
  out.grads = params.gradients();
  return out;
}

/// Runs `epochs` epochs of Adam on random aligned patches. Deterministic given seeds.
inline TrainResult train(const ModelConfig& model_cfg, const TrainingConfig& train_cfg, const DegradationSpec& spec,
                         const std::vector<Tensor4>& hr_images, const std::optional<WeightSet>& resume = std::nullopt,
                         const TrainHooks& hooks = {}) {
  model_cfg.validate();
  train_cfg.validate(model_cfg);
  detail::require<ConfigError>(spec.scale == model_cfg.scale, "degradation scale differs from model scale");
  detail::require<ConfigError>(!hr_images.empty(), "train: empty dataset");
  const int patch = train_cfg.patch_for(model_cfg.scale);
  for (const auto& img : hr_images)
    detail::require<ConfigError>(img.c() == model_cfg.c_in, "train: image channel count differs from c_in");

  TrainResult result;
  if (resume) {
    check_weights_match(*resume, model_cfg);
    result.weights = *resume;
  } else {
    result.weights = build_model(model_cfg, train_cfg.seed);
  }
  if (train_cfg.epochs == 0) return result;

  const PatchSampler sampler(hr_images, spec, train_cfg.seed);
  for (const auto& lr : sampler.lr_images())
    detail::require<ConfigError>(lr.h() >= patch && lr.w() >= patch,
                                 "train: LR image " + lr.dims().str() + " smaller than patch " + std::to_string(patch));
  std::mt19937_64 rng(train_cfg.seed + 0x5bd1e995ULL);
  AdamState adam;
  const auto loss_weights = train_cfg.weights_for(model_cfg.T);
  const int steps = train_cfg.steps_per_epoch();
  int global = 0;
  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const double lr = lr_at_epoch(epoch, train_cfg);
    double epoch_loss = 0.0;
    for (int s = 0; s < steps; ++s, ++global) {
      std::vector<Tensor4> lr_parts;
      std::vector<std::vector<Tensor4>> target_parts(model_cfg.T);
      for (int b = 0; b < train_cfg.batch_size; ++b) {
        PatchPair pair = sampler.sample(patch, rng, train_cfg.augment);
        const std::uint64_t noise_seed = rng();
        auto targets = curriculum_targets(pair.hr, spec, model_cfg.T, noise_seed);
        lr_parts.push_back(std::move(pair.lr));
        for (int t = 0; t < model_cfg.T; ++t) target_parts[t].push_back(std::move(targets[t]));
      }
      const Tensor4 lr_batch = batch_stack<float>(lr_parts);
      std::vector<Tensor4> targets;
      for (auto& parts : target_parts) targets.push_back(batch_stack<float>(parts));

      BatchGradient g;
      try {
        g = batch_gradient(result.weights, model_cfg, lr_batch, targets, loss_weights);
      } catch (const NumericalError&) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(global));
      }
      adam_step(result.weights, g.grads, adam, lr);
      StepRecord rec{epoch, global, lr, g.loss, g.per_iteration};
      if (hooks.on_step) hooks.on_step(rec);
      result.history.push_back(std::move(rec));
      epoch_loss += g.loss;
    }
    result.epoch_mean_loss.push_back(epoch_loss / steps);
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, result.weights);
  }
  return result;
}

}  // namespace srfbn
