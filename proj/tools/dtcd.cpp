// dtcd: command-line entry point. Every subcommand reads one RunConfig
// (JSON file plus flag overrides), writes the resolved config to --out and
// then its own artifacts there.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "dtcd/config.hpp"
#include "dtcd/raster_io.hpp"
#include "dtcd/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace dtcd;

namespace {

/// Flag -> RunConfig key. Each flag sets exactly one key.
struct FlagValues {
  std::string config;
  std::optional<std::string> out, preset, device, model, manifest, checkpoint, split, t1, t2, seg_t1, seg_t2, cd;
  std::optional<std::uint64_t> seed, steps;
  std::optional<double> tau;
  std::optional<std::size_t> workers;
  std::optional<bool> deterministic, synthetic;

  std::vector<std::pair<std::string, json>> overrides() const {
    std::vector<std::pair<std::string, json>> o;
    auto put = [&](const char* key, const auto& v) {
      if (v) o.emplace_back(key, json(*v));
    };
    put("out", out);
    put("train.preset", preset);
    put("device", device);
    put("model.preset", model);
    put("data.manifest", manifest);
    put("eval.checkpoint", checkpoint);
    put("eval.split", split);
    put("data.t1", t1);
    put("data.t2", t2);
    put("data.seg_t1", seg_t1);
    put("data.seg_t2", seg_t2);
    put("data.cd", cd);
    put("train.seed", seed);
    put("train.max_steps", steps);
    put("eval.tau", tau);
    put("train.workers", workers);
    put("deterministic", deterministic);
    put("data.synthetic", synthetic);
    return o;
  }
};

void add_flags(CLI::App& app, FlagValues& f) {
  app.add_option("--config", f.config, "JSON RunConfig file")->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "output directory [out]");
  app.add_option("--seed", f.seed, "training seed [train.seed]");
  app.add_option("--preset", f.preset, "ablation preset, e.g. SCDN_DAM_CDL_SSN_DA [train.preset]");
  app.add_option("--tau", f.tau, "binarization threshold [eval.tau]");
  app.add_option("--device", f.device, "compute device; only cpu [device]");
  app.add_option("--workers", f.workers, "data-loading workers [train.workers]");
  app.add_option("--deterministic", f.deterministic, "single worker, bitwise reproducible [deterministic]")
      ->expected(0, 1)
      ->default_str("true");
  app.add_option("--model", f.model, "network size: default or tiny [model.preset]");
  app.add_option("--steps", f.steps, "optimizer steps [train.max_steps]");
  app.add_option("--manifest", f.manifest, "manifest path [data.manifest]");
  app.add_option("--checkpoint", f.checkpoint, "checkpoint to evaluate [eval.checkpoint]");
  app.add_option("--split", f.split, "train, val or test [eval.split]");
  app.add_option("--t1", f.t1, "epoch-1 image [data.t1]");
  app.add_option("--t2", f.t2, "epoch-2 image [data.t2]");
  app.add_option("--seg-t1", f.seg_t1, "epoch-1 building label [data.seg_t1]");
  app.add_option("--seg-t2", f.seg_t2, "epoch-2 building label [data.seg_t2]");
  app.add_option("--cd", f.cd, "change label [data.cd]");
  app.add_option("--synthetic", f.synthetic, "prepare a procedural scene [data.synthetic]")
      ->expected(0, 1)
      ->default_str("true");
}

std::string keys_help() {
  std::ostringstream os;
  os << "\nConfig keys (JSON path = default):\n";
  for (const auto& [key, value] : default_keys()) os << "  " << key << " = " << value.dump() << '\n';
  os << "\nEnvironment: " << kCacheDirEnv << " sets data.cache_dir when the config leaves it empty.\n"
     << "Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric abort or failed self-check.\n";
  return os.str();
}

RunConfig start(const FlagValues& f) {
  RunConfig c = load_run_config(f.config, f.overrides());
  write_resolved_config(c);
  return c;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Manifest load_run_manifest(const RunConfig& c) { return load_manifest(c.data.manifest); }

fs::path checkpoint_path(const RunConfig& c) {
  if (!c.eval.checkpoint.empty()) return c.eval.checkpoint;
  if (fs::exists(c.out_dir() / "best.ckpt")) return c.out_dir() / "best.ckpt";
  return c.out_dir() / "last.ckpt";
}

int cmd_prepare(const RunConfig& c) {
  const fs::path cache = c.data.cache_dir;
  fs::create_directories(cache);
  Manifest m;
  if (c.data.synthetic) {
    SyntheticOptions so = c.data.synthetic_options;
    so.tile = c.data.tile_size;
    so.id = c.data.scene_id;
    const SceneSet s = make_synthetic_scene(so);
    m = build_manifest({describe(s)}, c.data.tile_size, c.data.split_ratios, c.data.split_seed);
    write_tile_cache(s, m, cache);
  } else {
    const std::array<std::pair<std::string_view, std::string>, 5> inputs = {
        {{"t1", c.data.t1}, {"t2", c.data.t2}, {"seg_t1", c.data.seg_t1}, {"seg_t2", c.data.seg_t2}, {"cd", c.data.cd}}};
    for (const auto& [kind, path] : inputs)
      if (path.empty()) throw ConfigError("prepare needs data." + std::string(kind) + " (or data.synthetic)");
    // One raster in memory at a time: a full scene image is ~1.5 GB.
    SceneInfo info{c.data.scene_id, 0, 0, {}};
    for (const auto& [kind, path] : inputs) {
      const bool image = kind == "t1" || kind == "t2";
      const Raster r = read_raster(path, image ? 3 : 1);
      if (kind == "t1") {
        info.width = r.width;
        info.height = r.height;
        m = build_manifest({info}, c.data.tile_size, c.data.split_ratios, c.data.split_seed);
      } else if (r.width != info.width || r.height != info.height) {
        throw DataError("raster " + path + " is " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                        ", expected " + std::to_string(info.width) + "x" + std::to_string(info.height));
      }
      if (!image)
        for (auto v : r.pixels)
          if (v != 0 && v != 255) throw DataError("label raster " + path + " holds values other than 0 and 255");
      info.checksums[std::string(kind)] = raster_checksum(r);
      write_raster_tiles(r, kind, info.id, m, cache);
    }
    m.scenes = {info};
    update_cache_index(cache, info.id, info.checksums);
  }
  save_manifest(m, c.data.manifest);
  std::cout << "manifest " << c.data.manifest << ": " << m.records.size() << " tiles (train "
            << m.count(Split::train) << ", val " << m.count(Split::val) << ", test " << m.count(Split::test)
            << "), tiles in " << cache.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& c) {
  const Manifest m = load_run_manifest(c);
  const CachedTileSource src(c.data.cache_dir, m);
  TrainIo io;
  io.out_dir = c.out_dir();
  io.on_record = [](const json& j) {
    if (j["kind"] == "eval")
      std::cout << "step " << j["step"] << " " << j["split"].get<std::string>() << " change F1 " << j["change"]["f1"]
                << '\n';
  };
  const TrainResult r = train(c.train, src, m, io);
  std::cout << "trained " << r.last.step << " steps" << (r.stopped_early ? " (target train F1 reached)" : "")
            << "; checkpoints in " << c.out_dir().string() << '\n';
  return 0;
}

int cmd_eval(const RunConfig& c) {
  const Manifest m = load_run_manifest(c);
  const CachedTileSource src(c.data.cache_dir, m);
  const fs::path ckpt = checkpoint_path(c);
  const auto net = load_network<float>(load_checkpoint(ckpt));
  const Split split = split_from_string(c.eval.split);
  const fs::path masks = c.out_dir() / "masks", overlays = c.out_dir() / "overlays";
  BatchVisitor<float> visit;
  if (c.eval.write_masks || c.eval.overlays)
    visit = [&](const Batch<float>& b, const Mask& change, const Mask* s1, const Mask* s2) {
      const Mask label = to_mask(b.y_cd);
      for (std::size_t i = 0; i < b.size(); ++i) {
        const TileRecord& rec = m.records[b.records[i]];
        if (c.eval.write_masks) {
          write_png(mask_to_raster(change, i), masks / tile_file_name(rec, "cd"));
          if (s1) write_png(mask_to_raster(*s1, i), masks / tile_file_name(rec, "seg_t1"));
          if (s2) write_png(mask_to_raster(*s2, i), masks / tile_file_name(rec, "seg_t2"));
        }
        if (c.eval.overlays) write_png(overlay_raster(change, label, i), overlays / tile_file_name(rec, "cd"));
      }
    };
  const EvalReport r = evaluate_split(net, src, m, split, c.eval.tau, c.train.batch, c.train.workers, visit);
  const std::string run_id = c.out_dir().filename().string();
  json doc = {{"run_id", run_id},
              {"checkpoint", ckpt.string()},
              {"split", c.eval.split},
              {"tau", c.eval.tau},
              {"change", to_json(r.change)}};
  if (r.segmentation) doc["segmentation"] = to_json(*r.segmentation);
  write_json(c.out_dir() / "metrics.json", doc);
  std::ofstream(c.out_dir() / "metrics.csv") << metrics_csv_header() << '\n'
                                             << metrics_csv_row(run_id, c.eval.split, c.eval.tau, r.change) << '\n';
  std::cout << "change: recall " << r.change.recall << " precision " << r.change.precision << " F1 " << r.change.f1
            << " IoU " << r.change.iou << '\n';
  return 0;
}

int cmd_predict(const RunConfig& c) {
  if (c.data.t1.empty() || c.data.t2.empty()) throw ConfigError("predict needs data.t1 and data.t2");
  const auto net = load_network<float>(load_checkpoint(checkpoint_path(c)));
  const RasterPrediction p =
      predict_raster(net, read_raster(c.data.t1, 3), read_raster(c.data.t2, 3), c.data.tile_size, c.eval.tau);
  write_png(p.change, c.out_dir() / "change.png");
  if (!p.seg_t1.pixels.empty()) {
    write_png(p.seg_t1, c.out_dir() / "seg_t1.png");
    write_png(p.seg_t2, c.out_dir() / "seg_t2.png");
  }
  std::cout << "wrote change map to " << (c.out_dir() / "change.png").string() << '\n';
  return 0;
}

int cmd_ablate(const RunConfig& c) {
  const Manifest m = load_run_manifest(c);
  const CachedTileSource src(c.data.cache_dir, m);
  const auto rows = run_ablation(c.train, src, m, split_from_string(c.eval.split), c.out_dir());
  json doc = json::array();
  for (const auto& r : rows)
    doc.push_back({{"preset", std::string(to_string(r.preset))}, {"label", table_label(r.preset)},
                   {"steps", r.steps}, {"change", to_json(r.change)}});
  write_json(c.out_dir() / "ablation.json", doc);
  std::cout << ablation_table_csv(rows);
  return 0;
}

int cmd_compare_pc(const RunConfig& c) {
  const Manifest m = load_run_manifest(c);
  const CachedTileSource src(c.data.cache_dir, m);
  const auto net = load_network<float>(load_checkpoint(checkpoint_path(c)));
  const auto r =
      compare_post_classification(net, src, m, split_from_string(c.eval.split), c.eval.tau, c.train.batch,
                                  c.train.workers);
  write_json(c.out_dir() / "post_classification.json", to_json(r));
  std::cout << "IoU vs subtracted labels " << r.subtracted.iou << ", vs dataset labels " << r.dataset.iou << '\n';
  return 0;
}

int cmd_check(const RunConfig& c) {
  bool ok = true;
  for (const auto& r : run_self_checks(c.out_dir() / "selfcheck")) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : "  (" + r.detail + ")") << '\n';
    ok = ok && r.passed;
  }
  fs::remove_all(c.out_dir() / "selfcheck");
  if (!ok) throw NumericError("self-check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-task building change detection: data preparation, training, evaluation and analysis."};
  app.require_subcommand(1);
  app.footer(keys_help());
  FlagValues flags;
  using Handler = int (*)(const RunConfig&);
  const std::vector<std::tuple<const char*, const char*, Handler>> commands = {
      {"prepare", "tile a scene (or a synthetic one) and write the manifest and tile cache", cmd_prepare},
      {"train", "train a network from the manifest", cmd_train},
      {"eval", "evaluate a checkpoint on a split; writes metrics and masks", cmd_eval},
      {"predict", "predict change and building maps for an image pair", cmd_predict},
      {"ablate", "train and evaluate every ablation preset", cmd_ablate},
      {"compare-pc", "post-classification comparison against subtracted and dataset labels", cmd_compare_pc},
      {"check", "run the gradient and invariant self-tests", cmd_check}};
  Handler chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_flags(*sub, flags);
    sub->footer(keys_help());
    sub->callback([&chosen, fn = fn] { chosen = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    return chosen(start(flags));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  }
}
