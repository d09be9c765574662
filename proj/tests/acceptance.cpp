// Acceptance run: one PASS/FAIL/SKIP line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "srfbn/analysis.hpp"
#include "srfbn/checkpoint.hpp"
#include "srfbn/degradation.hpp"
#include "srfbn/image_io.hpp"
#include "srfbn/inference.hpp"
#include "srfbn/metrics.hpp"
#include "srfbn/selfcheck.hpp"
#include "srfbn/synthetic.hpp"
#include "srfbn/training.hpp"

using namespace srfbn;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome from_checks(const std::vector<CheckResult>& checks) {
  bool ok = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    ok = ok && checks[i].passed;
    os << (i ? "; " : "") << checks[i].name << " " << (checks[i].passed ? "ok" : "FAILED") << " (" << checks[i].detail
       << ")";
  }
  return {ok ? Status::Pass : Status::Fail, os.str()};
}

template <class T>
std::string num(T v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Outcome parameter_counts() { return from_checks(parameter_count_selfchecks()); }

Outcome bicubic_baseline() {
  const char* dir = std::getenv("SRFBN_SET5_DIR");
  if (!dir || !*dir) return {Status::Skip, "set SRFBN_SET5_DIR to a directory with the five Set5 HR PNGs"};
  auto data = read_png_dir(dir, 3);
  if (data.size() != 5) return {Status::Fail, "expected 5 PNGs in " + std::string(dir) + ", found " + num(data.size())};
  for (auto& d : data) d.image = modcrop(d.image, 4);
  const auto rep = evaluate_baseline(data, {DegradationKind::BI, 4}, 4, Upsampler::Bicubic);
  const double p = rep.mean_psnr(0), s = rep.mean_ssim(0);
  const bool ok = std::abs(p - 28.42) <= 0.05 && std::abs(s - 0.8104) <= 0.005;
  return {ok ? Status::Pass : Status::Fail, "mean PSNR " + num(p, 5) + " dB (28.42 +-0.05), mean SSIM " + num(s, 5) +
                                                " (0.8104 +-0.005)"};
}

Outcome gradient_oracle() { return from_checks(gradient_selfchecks()); }

Outcome shape_law() { return from_checks({shape_law_selfcheck()}); }

Outcome weight_sharing() { return from_checks({weight_sharing_selfcheck()}); }

Outcome feedforward() { return from_checks({feedforward_selfcheck()}); }

Outcome overfit() {
  ModelConfig c;
  c.scale = 2;
  c.T = 2;
  c.G = 2;
  c.m = 8;
  TrainingConfig t;
  t.batch_size = 1;
  t.patches_per_epoch = 2000;  // one epoch of 2000 single-patch steps
  t.epochs = 1;
  t.lr_patch = 32;  // the whole 32x32 LR image
  t.augment = false;
  t.seed = 1;
  const Tensor4 hr = synthetic_image(64, 64, 7);
  const DegradationSpec spec{DegradationKind::BI, 2};
  const auto result = train(c, t, spec, {hr});
  bool finite = true;
  for (const auto& s : result.history) finite = finite && std::isfinite(s.loss);
  const double l1 = result.history.back().per_iteration.back();
  const Tensor4 lr = degrade(hr, spec, 0);
  Tensor4 sr = super_resolve(lr, result.weights, c);
  detail::clamp01(sr);
  const auto y = [](const Tensor4& img) { return crop_border(rgb_to_y(img), 2); };
  const double p_sr = psnr(y(sr), y(hr));
  const double p_bic = psnr(y(bicubic_resize(lr, 2, ResizeDirection::Up)), y(hr));
  const bool ok = finite && l1 < 0.01 && p_sr - p_bic >= 3.0;
  return {ok ? Status::Pass : Status::Fail, num(result.history.size()) + " steps, final-iteration L1 " + num(l1) +
                                                " (< 0.01), Y-PSNR " + num(p_sr, 5) + " dB vs bicubic " + num(p_bic, 5) +
                                                " dB (gain " + num(p_sr - p_bic, 4) + ", need >= 3)"};
}

Outcome curriculum() {
  const Tensor4 hr = synthetic_image(24, 24, 2);
  const auto blurred = gaussian_blur(hr, 7, 1.6);
  const auto bd = curriculum_targets(hr, {DegradationKind::BD, 2}, 4, 5);
  const auto dn = curriculum_targets(hr, {DegradationKind::DN, 2}, 4, 5);
  const auto bi = curriculum_targets(hr, {DegradationKind::BI, 2}, 4, 5);
  const auto noisy = add_gaussian_noise(hr, 30, 5);
  const bool bd_ok = bd.size() == 4 && bd[0] == blurred && bd[1] == blurred && bd[2] == hr && bd[3] == hr;
  const bool dn_ok = dn.size() == 4 && dn[0] == noisy && dn[1] == noisy && dn[2] == hr && dn[3] == hr &&
                     max_abs_diff(noisy, hr) > 0;
  bool bi_ok = bi.size() == 4;
  for (const auto& t : bi) bi_ok = bi_ok && t == hr;
  const bool ok = bd_ok && dn_ok && bi_ok;
  return {ok ? Status::Pass : Status::Fail, std::string("BD [blurred, blurred, original, original] ") +
                                                (bd_ok ? "ok" : "wrong") + "; DN [noisy, noisy, original, original] " +
                                                (dn_ok ? "ok" : "wrong") + "; BI four identical " + (bi_ok ? "ok" : "wrong")};
}

Outcome degradation_statistics() {
  const auto k = gaussian_kernel(7, 1.6);
  const double sum = std::accumulate(k.begin(), k.end(), 0.0);
  const Tensor4 gray(1, 1, 1000, 1000, 0.5f);
  const auto noisy = add_gaussian_noise(gray, 30, 2024);
  double s = 0, sq = 0;
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const double d = double(noisy[i]) - 0.5;
    s += d;
    sq += d * d;
  }
  const double n = double(noisy.size());
  const double sd = std::sqrt(sq / n - (s / n) * (s / n));
  const bool ok = std::abs(sum - 1.0) <= 1e-7 && sd >= 0.113 && sd <= 0.122;
  return {ok ? Status::Pass : Status::Fail, "7x7 kernel sum - 1 = " + num(sum - 1.0, 3) + ", noise std over 1e6 samples " +
                                                num(sd, 5) + " (range [0.113, 0.122])"};
}

double rel_gap(double got, double ref) { return std::abs(got - ref) / std::max(1.0, std::abs(ref)); }

Outcome oracle_equivalence() {
  double conv_worst = 0, deconv_worst = 0, blur_worst = 0, bic_worst = 0, spec_worst = 0;
  std::uint64_t seed = 9000;
  const ConvGeometry geoms[] = {{3, 2, 1}, {3, 1, 1}, {6, 2, 2}, {7, 3, 2}, {8, 4, 2}};
  for (const auto& g : geoms) {
    const auto x = oracle::random_tensor({2, 3, 8, 8}, ++seed);
    auto p = ConvParams::conv(3, 4, g);
    p.weights = oracle::random_tensor(p.weights.dims(), ++seed);
    const auto b = oracle::random_tensor({4, 1, 1, 1}, ++seed);
    p.bias.assign(b.storage().begin(), b.storage().end());
    int oh = 0, ow = 0;
    const auto ref = oracle::conv2d(x, p.weights, p.bias, g.stride, g.pad, oh, ow);
    const auto got = conv2d(x, p);
    for (std::size_t i = 0; i < ref.size(); ++i) conv_worst = std::max(conv_worst, rel_gap(got[i], ref[i]));

    const auto xd = oracle::random_tensor({2, 4, 5, 4}, ++seed);
    auto q = ConvParams::deconv(4, 3, g);
    q.weights = oracle::random_tensor(q.weights.dims(), ++seed);
    q.bias.assign(3, 0.25f);
    const auto dref = oracle::deconv2d(xd, q.weights, q.bias, g.stride, g.pad, oh, ow);
    const auto dgot = deconv2d(xd, q);
    for (std::size_t i = 0; i < dref.size(); ++i) deconv_worst = std::max(deconv_worst, rel_gap(dgot[i], dref[i]));
  }
  for (int i = 0; i < 5; ++i) {
    const auto img = oracle::random_tensor({1, 3, 9 + i, 11 - i}, ++seed, 0.f, 1.f);
    const auto ref = oracle::gaussian_blur(img, 7, 1.6);
    const auto got = gaussian_blur(img, 7, 1.6);
    for (std::size_t j = 0; j < ref.size(); ++j) blur_worst = std::max(blur_worst, std::abs(got[j] - ref[j]));
  }
  for (int i = 0; i < 6; ++i) {
    const int s = 2 + i % 3;
    const bool down = i < 3;
    const auto img = oracle::random_tensor({1, 2, down ? 4 * s : 5, down ? 3 * s : 6}, ++seed, 0.f, 1.f);
    int oh = 0, ow = 0;
    const auto ref = oracle::bicubic(img, s, down, oh, ow);
    const auto got = bicubic_resize(img, s, down ? ResizeDirection::Down : ResizeDirection::Up);
    for (std::size_t j = 0; j < ref.size(); ++j) bic_worst = std::max(bic_worst, std::abs(got[j] - ref[j]));
  }
  const int sizes[][3] = {{8, 8, 4}, {6, 10, 5}, {9, 7, 3}, {16, 12, 8}, {5, 5, 2}};
  for (const auto& sz : sizes) {
    const auto map = oracle::random_tensor({1, 1, sz[0], sz[1]}, ++seed);
    const std::vector<double> x(map.storage().begin(), map.storage().end());
    const auto ref = oracle::radial_profile(oracle::dft_power(x, sz[0], sz[1]), sz[0], sz[1], sz[2]);
    const auto got = spectral_density(map, sz[2]);
    for (int b = 0; b < sz[2]; ++b) spec_worst = std::max(spec_worst, rel_gap(got.mean[b], ref[b]));
  }
  const bool ok = conv_worst < 1e-5 && deconv_worst < 1e-5 && blur_worst < 1e-6 && bic_worst < 1e-5 && spec_worst < 1e-4;
  return {ok ? Status::Pass : Status::Fail, "conv2d " + num(conv_worst, 2) + " (rel, < 1e-5), deconv2d " +
                                                num(deconv_worst, 2) + " (rel, < 1e-5), blur " + num(blur_worst, 2) +
                                                " (abs, < 1e-6), bicubic " + num(bic_worst, 2) +
                                                " (abs, < 1e-5), spectral_density " + num(spec_worst, 2) +
                                                " (rel, < 1e-4)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"parameter-count match", parameter_counts},
      {"bicubic baseline on Set5 x4", bicubic_baseline},
      {"gradient oracle", gradient_oracle},
      {"shape law", shape_law},
      {"weight-sharing invariant", weight_sharing},
      {"feedforward-ablation gradient", feedforward},
      {"overfit capacity", overfit},
      {"curriculum schedule", curriculum},
      {"degradation statistics", degradation_statistics},
      {"oracle equivalence", oracle_equivalence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
    failed += o.status == Status::Fail;
    std::cout << tag << "  criterion " << i + 1 << " " << criteria[i].first << " [" << std::fixed
              << std::setprecision(1) << secs << " s]: " << o.detail << std::defaultfloat << std::endl;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed" : "acceptance: all criteria met or skipped")
            << std::endl;
  return failed ? 1 : 0;
}
