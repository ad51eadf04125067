#ifndef DTCD_CONFIG_HPP
#define DTCD_CONFIG_HPP

// RunConfig: the single JSON document behind every CLI subcommand. Unknown
// keys are rejected with their dotted path; flags override file values; the
// resolved document (all defaults filled in) parses back to the same config.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dtcd/serialize.hpp"
#include "dtcd/synthetic.hpp"
#include "dtcd/trainer.hpp"

namespace dtcd {

inline constexpr const char* kCacheDirEnv = "DTCD_CACHE_DIR";

struct DataConfig {
  // Scene rasters for `prepare`; t1/t2 are also the image pair for `predict`.
  std::string t1, t2, seg_t1, seg_t2, cd;
  std::string scene_id = "scene";
  std::string manifest;   // "" -> <out>/manifest.json
  std::string cache_dir;  // "" -> $DTCD_CACHE_DIR, else <out>/tiles
  std::size_t tile_size = 256;
  SplitRatios split_ratios;
  std::uint64_t split_seed = 0;
  bool synthetic = false;  // `prepare` generates a procedural scene instead of reading rasters
  SyntheticOptions synthetic_options;
  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  double tau = 0.5;
  std::string split = "test";
  std::string checkpoint;  // "" -> <out>/best.ckpt if present, else <out>/last.ckpt
  bool write_masks = true;
  bool overlays = false;
  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  std::string out = "run";
  std::string device = "cpu";
  /// Single data-loading worker; runs are then bitwise reproducible.
  bool deterministic = true;
  DataConfig data;
  TrainConfig train;  // train.model and train.loss are the "model" and "loss" sections
  EvalConfig eval;
  bool operator==(const RunConfig&) const = default;

  std::filesystem::path out_dir() const { return out; }
};

inline json to_json(const RunConfig& c) {
  const auto& so = c.data.synthetic_options;
  json train = to_json(c.train);
  return {{"out", c.out},
          {"device", c.device},
          {"deterministic", c.deterministic},
          {"data",
           {{"t1", c.data.t1},
            {"t2", c.data.t2},
            {"seg_t1", c.data.seg_t1},
            {"seg_t2", c.data.seg_t2},
            {"cd", c.data.cd},
            {"scene_id", c.data.scene_id},
            {"manifest", c.data.manifest},
            {"cache_dir", c.data.cache_dir},
            {"tile_size", c.data.tile_size},
            {"split_ratios", {c.data.split_ratios.train, c.data.split_ratios.val, c.data.split_ratios.test}},
            {"split_seed", c.data.split_seed},
            {"synthetic", c.data.synthetic},
            {"synthetic_options",
             {{"tiles_x", so.tiles_x},
              {"tiles_y", so.tiles_y},
              {"buildings_per_tile", so.buildings_per_tile},
              {"new_per_tile", so.new_per_tile},
              {"p_removed", so.p_removed},
              {"min_extent", so.min_extent},
              {"max_extent", so.max_extent},
              {"seed", so.seed}}}}},
          {"model", to_json(c.train.model)},
          {"loss", to_json(c.train.loss)},
          {"train", train},
          {"eval",
           {{"tau", c.eval.tau},
            {"split", c.eval.split},
            {"checkpoint", c.eval.checkpoint},
            {"write_masks", c.eval.write_masks},
            {"overlays", c.eval.overlays}}}};
}

inline TrainConfig train_from_json(const json& j, const std::string& path, TrainConfig t) {
  StrictReader r(j, path);
  std::string preset(to_string(t.preset));
  r.get("preset", preset);
  t.preset = preset_from_string(preset);
  r.get("batch", t.batch);
  r.get("lr", t.adam.lr);
  r.get("beta1", t.adam.beta1);
  r.get("beta2", t.adam.beta2);
  r.get("eps", t.adam.eps);
  r.get("max_steps", t.max_steps);
  r.get("seed", t.seed);
  r.get("checkpoint_every", t.checkpoint_every);
  r.get("eval_every", t.eval_every);
  r.get("workers", t.workers);
  r.get("stop_at_train_f1", t.stop_at_train_f1);
  r.finish();
  return t;
}

inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictReader r(j, "");
  r.get("out", c.out);
  r.get("device", c.device);
  r.get("deterministic", c.deterministic);
  if (const json* d = r.child("data")) {
    StrictReader dr(*d, "data");
    dr.get("t1", c.data.t1);
    dr.get("t2", c.data.t2);
    dr.get("seg_t1", c.data.seg_t1);
    dr.get("seg_t2", c.data.seg_t2);
    dr.get("cd", c.data.cd);
    dr.get("scene_id", c.data.scene_id);
    dr.get("manifest", c.data.manifest);
    dr.get("cache_dir", c.data.cache_dir);
    dr.get("tile_size", c.data.tile_size);
    std::vector<double> ratios{c.data.split_ratios.train, c.data.split_ratios.val, c.data.split_ratios.test};
    dr.get("split_ratios", ratios);
    if (ratios.size() != 3) throw ConfigError("data.split_ratios must have three entries (train, val, test)");
    c.data.split_ratios = {ratios[0], ratios[1], ratios[2]};
    dr.get("split_seed", c.data.split_seed);
    dr.get("synthetic", c.data.synthetic);
    if (const json* s = dr.child("synthetic_options")) {
      auto& so = c.data.synthetic_options;
      StrictReader sr(*s, "data.synthetic_options");
      sr.get("tiles_x", so.tiles_x);
      sr.get("tiles_y", so.tiles_y);
      sr.get("buildings_per_tile", so.buildings_per_tile);
      sr.get("new_per_tile", so.new_per_tile);
      sr.get("p_removed", so.p_removed);
      sr.get("min_extent", so.min_extent);
      sr.get("max_extent", so.max_extent);
      sr.get("seed", so.seed);
      sr.finish();
    }
    dr.finish();
  }
  if (const json* m = r.child("model")) c.train.model = model_from_json(*m, "model", c.train.model);
  if (const json* l = r.child("loss")) c.train.loss = loss_from_json(*l, "loss", c.train.loss);
  if (const json* t = r.child("train")) c.train = train_from_json(*t, "train", c.train);
  if (const json* e = r.child("eval")) {
    StrictReader er(*e, "eval");
    er.get("tau", c.eval.tau);
    er.get("split", c.eval.split);
    er.get("checkpoint", c.eval.checkpoint);
    er.get("write_masks", c.eval.write_masks);
    er.get("overlays", c.eval.overlays);
    er.finish();
  }
  r.finish();
  return c;
}

/// Fills environment defaults and checks cross-field constraints.
inline RunConfig resolve(RunConfig c) {
  if (c.device != "cpu") throw ConfigError("device '" + c.device + "' is not available; only 'cpu' is supported");
  if (c.out.empty()) throw ConfigError("out must not be empty");
  if (c.data.cache_dir.empty())
    if (const char* env = std::getenv(kCacheDirEnv); env && *env) c.data.cache_dir = env;
  if (c.data.cache_dir.empty()) c.data.cache_dir = (c.out_dir() / "tiles").string();
  if (c.data.manifest.empty()) c.data.manifest = (c.out_dir() / "manifest.json").string();
  if (c.data.tile_size == 0 || c.data.tile_size % 32)
    throw ConfigError("data.tile_size must be a positive multiple of 32");
  c.data.split_ratios.validate();
  split_from_string(c.eval.split);
  if (c.deterministic) c.train.workers = 1;
  c.train.tau = c.eval.tau;
  c.train = resolve(c.train);
  return c;
}

/// Dotted key -> JSON value for every leaf of a config document.
inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
  } else {
    out.emplace_back(prefix, j);
  }
}

inline std::vector<std::pair<std::string, json>> default_keys() {
  std::vector<std::pair<std::string, json>> keys;
  flatten(to_json(RunConfig{}), "", keys);
  return keys;
}

/// Sets a dotted key in a JSON document, creating intermediate objects.
inline void set_key(json& doc, const std::string& dotted, json value) {
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string part = dotted.substr(start, dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

/// Loads an optional config file, applies flag overrides (dotted key -> value)
/// and resolves defaults.
inline RunConfig load_run_config(const std::filesystem::path& file,
                                 const std::vector<std::pair<std::string, json>>& overrides) {
  json doc = file.empty() ? json::object() : read_json_file(file);
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : overrides) set_key(doc, key, value);
  return resolve(run_config_from_json(doc));
}

inline constexpr const char* kResolvedConfigName = "resolved_config.json";

inline void write_resolved_config(const RunConfig& c) {
  std::filesystem::create_directories(c.out_dir());
  std::ofstream(c.out_dir() / kResolvedConfigName) << to_json(c).dump(2) << '\n';
}

}  // namespace dtcd

#endif  // DTCD_CONFIG_HPP
