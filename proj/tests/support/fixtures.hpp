#ifndef DTCD_TESTS_FIXTURES_HPP
#define DTCD_TESTS_FIXTURES_HPP

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "dtcd/synthetic.hpp"
#include "dtcd/trainer.hpp"

namespace dtcd::testing {

/// A synthetic scene with its manifest and an in-memory tile source.
struct SyntheticData {
  SceneSet scene;
  Manifest manifest;
  SceneTileSource source;

  SyntheticData(const SyntheticOptions& o, SplitRatios ratios)
      : scene(make_synthetic_scene(o)),
        manifest(build_manifest({describe(scene)}, o.tile, ratios, o.seed)),
        source(manifest, {scene}) {}
  SyntheticData(const SyntheticData&) = delete;
};

/// The 16-pair 64x64 overfit set used for training checks.
inline SyntheticOptions overfit_options() {
  SyntheticOptions o;
  o.tiles_x = o.tiles_y = 4;
  o.tile = 64;
  o.seed = 3;
  return o;
}

inline TrainConfig tiny_config(AblationPreset p = AblationPreset::scdn_dam_cdl_ssn) {
  TrainConfig c;
  c.preset = p;
  c.model = ModelConfig::preset("tiny");
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("dtcd_test_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

inline std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace dtcd::testing

#endif
