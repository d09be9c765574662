#pragma once

// Run configuration: "key = value" text or JSON, mapped onto the model,
// training and degradation settings.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "srfbn/degradation.hpp"
#include "srfbn/error.hpp"
#include "srfbn/model.hpp"
#include "srfbn/training.hpp"

namespace srfbn {

struct RunConfig {
  ModelConfig model;
  TrainingConfig train;
  DegradationSpec degradation;
  std::string data_dir;       // HR PNG directory; empty to use synthetic images
  int synthetic_images = 0;
  int synthetic_size = 64;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline nlohmann::json parse_scalar(const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  if (v.find(',') != std::string::npos) {
    nlohmann::json arr = nlohmann::json::array();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) arr.push_back(parse_scalar(item));
    return arr;
  }
  char* end = nullptr;
  const long long iv = std::strtoll(v.c_str(), &end, 10);
  if (!v.empty() && *end == '\0') return iv;
  const double dv = std::strtod(v.c_str(), &end);
  if (!v.empty() && *end == '\0') return dv;
  return v;
}

/// Parses "key = value" lines; '#' starts a comment.
inline nlohmann::json parse_key_values(const std::string& text) {
  nlohmann::json out = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out[key] = parse_scalar(line.substr(eq + 1));
  }
  return out;
}

template <class T>
void take(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: bad value for ") + key);
  }
}

}  // namespace detail

inline const char* const kRunConfigKeys[] = {
    "scale", "T", "G", "m", "c_in", "c_out", "share_weights", "tie_loss_every_iteration",
    "lr_input_every_iteration", "use_udsl", "use_dsc", "degradation", "batch_size", "lr0", "lr_decay_factor",
    "lr_decay_period_epochs", "epochs", "patches_per_epoch", "loss_weights", "seed", "lr_patch", "augment",
    "checkpoint_every_epochs", "data", "synthetic_images", "synthetic_size"};

inline RunConfig run_config_from_json(const nlohmann::json& root) {
  // A run manifest carries the resolved config under "config".
  const nlohmann::json& j = root.contains("config") && root.at("config").is_object() ? root.at("config") : root;
  if (!j.is_object()) throw ConfigError("config: expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : kRunConfigKeys) known = known || key == k;
    if (!known) throw ConfigError("config: unknown key '" + key + "'");
  }
  RunConfig rc;
  using detail::take;
  take(j, "scale", rc.model.scale);
  take(j, "T", rc.model.T);
  take(j, "G", rc.model.G);
  take(j, "m", rc.model.m);
  take(j, "c_in", rc.model.c_in);
  take(j, "c_out", rc.model.c_out);
  take(j, "share_weights", rc.model.share_weights);
  take(j, "tie_loss_every_iteration", rc.model.tie_loss_every_iteration);
  take(j, "lr_input_every_iteration", rc.model.lr_input_every_iteration);
  take(j, "use_udsl", rc.model.use_udsl);
  take(j, "use_dsc", rc.model.use_dsc);
  std::string kind = to_string(rc.degradation.kind);
  take(j, "degradation", kind);
  rc.degradation.kind = parse_degradation(kind);
  rc.degradation.scale = rc.model.scale;
  take(j, "batch_size", rc.train.batch_size);
  take(j, "lr0", rc.train.lr0);
  take(j, "lr_decay_factor", rc.train.lr_decay_factor);
  take(j, "lr_decay_period_epochs", rc.train.lr_decay_period_epochs);
  take(j, "epochs", rc.train.epochs);
  take(j, "patches_per_epoch", rc.train.patches_per_epoch);
  if (j.contains("loss_weights")) {
    const auto& w = j.at("loss_weights");
    if (w.is_number()) rc.train.loss_weights = {w.get<double>()};
    else take(j, "loss_weights", rc.train.loss_weights);
  }
  take(j, "seed", rc.train.seed);
  take(j, "lr_patch", rc.train.lr_patch);
  take(j, "augment", rc.train.augment);
  take(j, "checkpoint_every_epochs", rc.train.checkpoint_every_epochs);
  take(j, "data", rc.data_dir);
  take(j, "synthetic_images", rc.synthetic_images);
  take(j, "synthetic_size", rc.synthetic_size);
  rc.model.validate();
  rc.train.validate(rc.model);
  if (rc.data_dir.empty() && rc.synthetic_images <= 0)
    throw ConfigError("config: set either data = DIR or synthetic_images = N");
  return rc;
}

inline RunConfig parse_run_config(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return run_config_from_json(j);
  }
  return run_config_from_json(detail::parse_key_values(text));
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

/// Fully resolved config as JSON (the manifest snapshot).
inline nlohmann::json to_json(const RunConfig& rc) {
  nlohmann::json j;
  j["scale"] = rc.model.scale;
  j["T"] = rc.model.T;
  j["G"] = rc.model.G;
  j["m"] = rc.model.m;
  j["c_in"] = rc.model.c_in;
  j["c_out"] = rc.model.c_out;
  j["share_weights"] = rc.model.share_weights;
  j["tie_loss_every_iteration"] = rc.model.tie_loss_every_iteration;
  j["lr_input_every_iteration"] = rc.model.lr_input_every_iteration;
  j["use_udsl"] = rc.model.use_udsl;
  j["use_dsc"] = rc.model.use_dsc;
  j["degradation"] = to_string(rc.degradation.kind);
  j["batch_size"] = rc.train.batch_size;
  j["lr0"] = rc.train.lr0;
  j["lr_decay_factor"] = rc.train.lr_decay_factor;
  j["lr_decay_period_epochs"] = rc.train.lr_decay_period_epochs;
  j["epochs"] = rc.train.epochs;
  j["patches_per_epoch"] = rc.train.patches_per_epoch;
  j["loss_weights"] = rc.train.weights_for(rc.model.T);
  j["seed"] = rc.train.seed;
  j["lr_patch"] = rc.train.lr_patch;
  j["augment"] = rc.train.augment;
  j["checkpoint_every_epochs"] = rc.train.checkpoint_every_epochs;
  j["data"] = rc.data_dir;
  j["synthetic_images"] = rc.synthetic_images;
  j["synthetic_size"] = rc.synthetic_size;
  return j;
}

}  // namespace srfbn
