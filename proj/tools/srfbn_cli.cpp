// srfbn command-line tool: degrade, train, eval, infer, inspect, selfcheck, synth.
//
// Exit codes: 0 ok, 1 usage/config, 2 I/O, 3 numerical failure, 4 selfcheck failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "srfbn/analysis.hpp"
#include "srfbn/checkpoint.hpp"
#include "srfbn/config.hpp"
#include "srfbn/degradation.hpp"
#include "srfbn/image_io.hpp"
#include "srfbn/inference.hpp"
#include "srfbn/metrics.hpp"
#include "srfbn/selfcheck.hpp"
#include "srfbn/synthetic.hpp"
#include "srfbn/training.hpp"

#ifndef SRFBN_VERSION
#define SRFBN_VERSION "dev"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace srfbn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSelfcheck = 4;

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename to " + path.string() + ": " + ec.message());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

/// Collected while a command runs, written as <out>/manifest.json at the end.
struct Manifest {
  std::string command;
  json config = json::object();
  json seeds = json::object();
  json inputs = json::array();
  json outputs = json::array();
  std::string started = utc_now();

  void write(const fs::path& dir) const {
    json j;
    j["command"] = command;
    j["tool_version"] = SRFBN_VERSION;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["started_at"] = started;
    j["finished_at"] = utc_now();
    write_text_atomic(dir / "manifest.json", j.dump(2) + "\n");
  }
};

json model_json(const ModelConfig& c) {
  return {{"scale", c.scale},
          {"T", c.T},
          {"G", c.G},
          {"m", c.m},
          {"c_in", c.c_in},
          {"c_out", c.c_out},
          {"share_weights", c.share_weights},
          {"tie_loss_every_iteration", c.tie_loss_every_iteration},
          {"lr_input_every_iteration", c.lr_input_every_iteration},
          {"use_udsl", c.use_udsl},
          {"use_dsc", c.use_dsc}};
}

bool same_structure(const ModelConfig& a, const ModelConfig& b) {
  return a.scale == b.scale && a.T == b.T && a.G == b.G && a.m == b.m && a.c_in == b.c_in && a.c_out == b.c_out &&
         a.share_weights == b.share_weights && a.use_udsl == b.use_udsl && a.use_dsc == b.use_dsc;
}

/// PNG files named by a path: the file itself or every *.png of a directory.
std::vector<fs::path> png_inputs(const fs::path& in) {
  if (fs::is_regular_file(in)) return {in};
  if (!fs::is_directory(in)) throw IoError("no such file or directory: " + in.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG files in " + in.string());
  return files;
}

std::vector<NamedImage> load_dataset(const fs::path& dir, int channels, int scale) {
  auto data = read_png_dir(dir, channels);
  if (data.empty()) throw IoError("no PNG files in " + dir.string());
  for (auto& d : data) d.image = modcrop(d.image, scale);
  return data;
}

Tensor4 normalize_for_display(const Tensor4& map) {
  float lo = map[0], hi = map[0];
  for (float v : map.storage()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Tensor4 out(map.dims());
  if (hi - lo <= 0) return out;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - lo) / (hi - lo);
  return out;
}

std::string spectrum_csv(const SpectralProfile& p) {
  std::ostringstream os;
  os << "bin,radius_lo,radius_hi,mean_power,count\n" << std::setprecision(10);
  const int bins = static_cast<int>(p.mean.size());
  for (int b = 0; b < bins; ++b)
    os << b << ',' << p.radius_lo[b] << ',' << 0.5 * (b + 1) / bins << ',' << p.mean[b] << ',' << p.count[b] << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
  std::string model = "bi";
  int scale = 4;
  std::uint64_t seed = 0;
  std::string in, out;
};

int cmd_degrade(const DegradeArgs& a) {
  DegradationSpec spec{parse_degradation(a.model), a.scale};
  spec.validate();
  Manifest mf{"degrade"};
  mf.config = {{"degradation", to_string(spec.kind)},
               {"scale", spec.scale},
               {"blur_kernel_size", spec.blur_kernel_size},
               {"blur_sigma", spec.blur_sigma},
               {"noise_sigma", spec.noise_sigma}};
  mf.seeds["seed"] = a.seed;
  const auto data = read_png_dir(a.in, 3);
  if (data.empty()) throw IoError("no PNG files in " + a.in);
  ensure_dir(a.out);
  std::ostringstream sidecar;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::uint64_t seed = a.seed + i;
    const Tensor4 lr = degrade(modcrop(data[i].image, spec.scale), spec, seed);
    const fs::path dst = fs::path(a.out) / (data[i].name + ".png");
    write_png(dst, lr);
    sidecar << data[i].name << ".png " << to_string(spec.kind) << ' ' << spec.scale << ' ' << seed << '\n';
    mf.inputs.push_back((fs::path(a.in) / (data[i].name + ".png")).string());
    mf.outputs.push_back(dst.string());
  }
  write_text_atomic(fs::path(a.out) / "degradation.txt", sidecar.str());
  mf.outputs.push_back((fs::path(a.out) / "degradation.txt").string());
  mf.write(a.out);
  std::cout << "degraded " << data.size() << " images (" << to_string(spec.kind) << " x" << spec.scale << ") into "
            << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config, resume, out;
};

int cmd_train(const TrainArgs& a) {
  const RunConfig rc = load_run_config(a.config);
  ensure_dir(a.out);
  Manifest mf{"train"};
  mf.config = to_json(rc);
  mf.seeds["seed"] = rc.train.seed;
  mf.inputs.push_back(a.config);

  std::vector<Tensor4> images;
  if (!rc.data_dir.empty()) {
    for (auto& d : load_dataset(rc.data_dir, rc.model.c_in, rc.model.scale)) images.push_back(std::move(d.image));
    mf.inputs.push_back(rc.data_dir);
  } else {
    for (int i = 0; i < rc.synthetic_images; ++i)
      images.push_back(synthetic_image(rc.synthetic_size, rc.synthetic_size, rc.train.seed + 1000 + i, rc.model.c_in));
  }

  std::optional<WeightSet> resume;
  if (!a.resume.empty()) {
    auto ck = checkpoint_load(a.resume);
    if (!same_structure(ck.config, rc.model))
      throw ConfigError("checkpoint " + a.resume + " does not match the configured model");
    resume = std::move(ck.weights);
    mf.inputs.push_back(a.resume);
  }

  TrainHooks hooks;
  hooks.on_epoch_end = [&](int epoch, const WeightSet& w) {
    const int every = rc.train.checkpoint_every_epochs;
    if (every > 0 && (epoch + 1) % every == 0) {
      const fs::path p = fs::path(a.out) / ("epoch_" + std::to_string(epoch + 1) + ".ckpt");
      checkpoint_save(w, rc.model, p);
      mf.outputs.push_back(p.string());
    }
  };
  const auto result = train(rc.model, rc.train, rc.degradation, images, resume, hooks);
  for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e)
    std::cout << "epoch " << e + 1 << "  mean loss " << std::setprecision(6) << result.epoch_mean_loss[e] << "\n";

  const fs::path ckpt = fs::path(a.out) / "final.ckpt";
  const fs::path csv = fs::path(a.out) / "loss.csv";
  checkpoint_save(result.weights, rc.model, ckpt);
  write_text_atomic(csv, result.history_csv());
  mf.outputs.push_back(ckpt.string());
  mf.outputs.push_back(csv.string());
  mf.write(a.out);
  std::cout << "wrote " << ckpt.string() << " and " << csv.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string ckpt, data, out = ".";
  std::string model = "bi";
  int scale = 0;
  int border = -1;
  std::uint64_t seed = 0;
  bool bicubic = false, bilinear = false;
};

int cmd_eval(const EvalArgs& a) {
  const bool baseline = a.bicubic || a.bilinear;
  if (a.bicubic && a.bilinear) throw ConfigError("choose one of --bicubic-baseline and --bilinear-baseline");
  if (!baseline && a.ckpt.empty()) throw ConfigError("eval needs --ckpt or a baseline flag");
  Manifest mf{"eval"};
  std::optional<Checkpoint> ck;
  int scale = a.scale;
  int channels = 3;
  if (!baseline) {
    ck = checkpoint_load(a.ckpt);
    if (scale != 0 && scale != ck->config.scale)
      throw ConfigError("--scale " + std::to_string(scale) + " differs from the checkpoint scale " +
                        std::to_string(ck->config.scale));
    scale = ck->config.scale;
    channels = ck->config.c_in;
    mf.inputs.push_back(a.ckpt);
    mf.config["model"] = model_json(ck->config);
  }
  if (scale == 0) throw ConfigError("--scale is required for baseline evaluation");
  DegradationSpec spec{parse_degradation(a.model), scale};
  spec.validate();
  const int border = a.border < 0 ? scale : a.border;
  const auto data = load_dataset(a.data, channels, scale);
  mf.inputs.push_back(a.data);
  mf.config["degradation"] = to_string(spec.kind);
  mf.config["scale"] = scale;
  mf.config["border_crop"] = border;
  mf.config["baseline"] = a.bicubic ? "bicubic" : a.bilinear ? "bilinear" : "none";
  mf.seeds["seed"] = a.seed;

  const EvalReport rep = baseline ? evaluate_baseline(data, spec, border, a.bicubic ? Upsampler::Bicubic : Upsampler::Bilinear, a.seed)
                                  : evaluate(ck->weights, ck->config, data, spec, border, a.seed);
  ensure_dir(a.out);
  const fs::path csv = fs::path(a.out) / "eval.csv";
  const fs::path summary = fs::path(a.out) / "summary.txt";
  write_text_atomic(csv, rep.to_csv());
  write_text_atomic(summary, rep.summary());
  mf.outputs.push_back(csv.string());
  mf.outputs.push_back(summary.string());
  mf.write(a.out);
  std::cout << rep.summary();
  return kExitOk;
}

struct InferArgs {
  std::string ckpt, in, out;
  bool ensemble = false, all_iterations = false;
};

int cmd_infer(const InferArgs& a) {
  const auto ck = checkpoint_load(a.ckpt);
  const auto files = png_inputs(a.in);
  ensure_dir(a.out);
  Manifest mf{"infer"};
  mf.config["model"] = model_json(ck.config);
  mf.config["ensemble"] = a.ensemble;
  mf.config["all_iterations"] = a.all_iterations;
  mf.inputs.push_back(a.ckpt);
  const auto variants = a.ensemble ? all_dihedral_variants() : std::vector<int>{0};
  for (const auto& f : files) {
    if (png_channels(f) != ck.config.c_in)
      throw ConfigError(f.string() + " has " + std::to_string(png_channels(f)) + " channels, model expects " +
                        std::to_string(ck.config.c_in));
    const Tensor4 lr = read_png(f, ck.config.c_in);
    const auto outs = self_ensemble_trace(lr, ck.weights, ck.config, variants);
    mf.inputs.push_back(f.string());
    const std::string stem = f.stem().string();
    if (a.all_iterations) {
      for (std::size_t t = 0; t < outs.size(); ++t) {
        const fs::path p = fs::path(a.out) / (stem + "_t" + std::to_string(t + 1) + ".png");
        write_png(p, outs[t]);
        mf.outputs.push_back(p.string());
      }
    } else {
      const fs::path p = fs::path(a.out) / (stem + ".png");
      write_png(p, outs.back());
      mf.outputs.push_back(p.string());
    }
  }
  mf.write(a.out);
  std::cout << "wrote " << mf.outputs.size() << " images to " << a.out << "\n";
  return kExitOk;
}

struct InspectArgs {
  std::string ckpt, in, out;
  int bins = 32;
};

int cmd_inspect(const InspectArgs& a) {
  if (a.bins < 2) throw ConfigError("--bins must be at least 2");
  const auto ck = checkpoint_load(a.ckpt);
  if (!fs::is_regular_file(a.in)) throw IoError("no such file: " + a.in);
  if (png_channels(a.in) != ck.config.c_in)
    throw ConfigError(a.in + " channel count does not match the model");
  const Tensor4 lr = read_png(a.in, ck.config.c_in);
  ensure_dir(a.out);
  Manifest mf{"inspect"};
  mf.config["model"] = model_json(ck.config);
  mf.config["bins"] = a.bins;
  mf.config["standardize"] = true;
  mf.inputs = {a.ckpt, a.in};
  const auto trace = forward_unrolled(lr, ck.weights, ck.config);
  for (std::size_t t = 0; t < trace.iterations.size(); ++t) {
    const auto& it = trace.iterations[t];
    for (auto [tag, feat] : {std::pair{"fout", &it.f_out}, std::pair{"l0", &it.refined}}) {
      const Tensor4 map = average_feature_map(*feat);
      const std::string base = std::string(tag) + "_t" + std::to_string(t + 1);
      const fs::path png = fs::path(a.out) / (base + ".png");
      const fs::path csv = fs::path(a.out) / (base + "_spectrum.csv");
      write_png(png, normalize_for_display(map));
      write_text_atomic(csv, spectrum_csv(spectral_density(map, a.bins, true)));
      mf.outputs.push_back(png.string());
      mf.outputs.push_back(csv.string());
    }
  }
  mf.write(a.out);
  std::cout << "wrote " << mf.outputs.size() << " files to " << a.out << "\n";
  return kExitOk;
}

int cmd_selfcheck(const std::string& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_selfchecks();
  int failed = 0;
  Manifest mf{"selfcheck"};
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << ": " << r.detail << "\n";
    failed += r.passed ? 0 : 1;
    mf.outputs.push_back({{"check", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << results.size() - failed << "/" << results.size() << " checks passed in " << std::fixed
            << std::setprecision(1) << secs << " s\n";
  ensure_dir(out);
  mf.write(out);
  return failed == 0 ? kExitOk : kExitSelfcheck;
}

struct SynthArgs {
  std::string out;
  int count = 5, size = 64, channels = 3;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  if (a.count < 1 || a.size < 1) throw ConfigError("--count and --size must be positive");
  if (a.channels != 1 && a.channels != 3) throw ConfigError("--channels must be 1 or 3");
  ensure_dir(a.out);
  Manifest mf{"synth"};
  mf.config = {{"count", a.count}, {"size", a.size}, {"channels", a.channels}};
  mf.seeds["seed"] = a.seed;
  for (int i = 0; i < a.count; ++i) {
    std::ostringstream name;
    name << "synth_" << std::setw(3) << std::setfill('0') << i << ".png";
    const fs::path p = fs::path(a.out) / name.str();
    write_png(p, synthetic_image(a.size, a.size, a.seed + i, a.channels));
    mf.outputs.push_back(p.string());
  }
  mf.write(a.out);
  std::cout << "wrote " << a.count << " images to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SRFBN super-resolution feedback network"};
  app.set_version_flag("--version", SRFBN_VERSION);
  app.require_subcommand(1);

  DegradeArgs dg;
  auto* degrade_cmd = app.add_subcommand("degrade", "Generate LR images from HR PNGs");
  degrade_cmd->add_option("--model", dg.model, "Degradation: bi, bd or dn")->check(CLI::IsMember({"bi", "bd", "dn", "BI", "BD", "DN"}));
  degrade_cmd->add_option("--scale", dg.scale, "Scale factor")->check(CLI::IsMember({2, 3, 4}));
  degrade_cmd->add_option("--seed", dg.seed, "Noise seed (image i uses seed + i)");
  degrade_cmd->add_option("--in", dg.in, "HR PNG directory")->required();
  degrade_cmd->add_option("--out", dg.out, "Output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  train_cmd->add_option("--config", tr.config, "key = value or JSON config (a run manifest also works)")->required();
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to initialize from");
  train_cmd->add_option("--out", tr.out, "Output directory")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Y-channel PSNR/SSIM on an HR dataset");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint");
  eval_cmd->add_option("--data", ev.data, "HR PNG directory")->required();
  eval_cmd->add_option("--model", ev.model, "Degradation: bi, bd or dn")->check(CLI::IsMember({"bi", "bd", "dn", "BI", "BD", "DN"}));
  eval_cmd->add_option("--scale", ev.scale, "Scale factor (defaults to the checkpoint's)")->check(CLI::IsMember({2, 3, 4}));
  eval_cmd->add_option("--border-crop", ev.border, "Border pixels ignored per edge (default: scale)");
  eval_cmd->add_option("--seed", ev.seed, "Degradation seed");
  eval_cmd->add_option("--out", ev.out, "Directory for eval.csv, summary.txt and the manifest");
  eval_cmd->add_flag("--bicubic-baseline", ev.bicubic, "Score plain bicubic upsampling instead of a model");
  eval_cmd->add_flag("--bilinear-baseline", ev.bilinear, "Score plain bilinear upsampling instead of a model");

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Super-resolve LR PNGs");
  infer_cmd->add_option("--ckpt", inf.ckpt, "Checkpoint")->required();
  infer_cmd->add_option("--in", inf.in, "LR PNG file or directory")->required();
  infer_cmd->add_option("--out", inf.out, "Output directory")->required();
  infer_cmd->add_flag("--ensemble", inf.ensemble, "Average over the 8 flips/rotations");
  infer_cmd->add_flag("--all-iterations", inf.all_iterations, "Write the output of every iteration");

  InspectArgs ins;
  auto* inspect_cmd = app.add_subcommand("inspect", "Average feature maps and spectral profiles per iteration");
  inspect_cmd->add_option("--ckpt", ins.ckpt, "Checkpoint")->required();
  inspect_cmd->add_option("--in", ins.in, "One LR PNG")->required();
  inspect_cmd->add_option("--out", ins.out, "Output directory")->required();
  inspect_cmd->add_option("--bins", ins.bins, "Number of annuli");

  std::string sc_out = ".";
  auto* selfcheck_cmd = app.add_subcommand("selfcheck", "Run the fast invariant suite");
  selfcheck_cmd->add_option("--out", sc_out, "Directory for the manifest");

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write deterministic synthetic HR images");
  synth_cmd->add_option("--out", sy.out, "Output directory")->required();
  synth_cmd->add_option("--count", sy.count, "Number of images");
  synth_cmd->add_option("--size", sy.size, "Edge length in pixels");
  synth_cmd->add_option("--channels", sy.channels, "1 or 3");
  synth_cmd->add_option("--seed", sy.seed, "Seed (image i uses seed + i)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    const auto used = app.get_subcommands();
    std::cerr << (used.empty() ? app.help() : used.front()->help());
    return kExitUsage;
  }

  try {
    if (*degrade_cmd) return cmd_degrade(dg);
    if (*train_cmd) return cmd_train(tr);
    if (*eval_cmd) return cmd_eval(ev);
    if (*infer_cmd) return cmd_infer(inf);
    if (*inspect_cmd) return cmd_inspect(ins);
    if (*selfcheck_cmd) return cmd_selfcheck(sc_out);
    if (*synth_cmd) return cmd_synth(sy);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
