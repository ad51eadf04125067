#ifndef DTCD_DATAPIPE_HPP
#define DTCD_DATAPIPE_HPP

// Scene rasters -> non-overlapping tiles -> seeded train/val/test manifest ->
// normalised, jointly augmented bitemporal samples -> deterministic batches.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtcd/tensor.hpp"

namespace dtcd {

// ---------------------------------------------------------------------------
// Rasters and scenes

/// 8-bit raster, row-major with interleaved channels (RGB for images).
struct Raster {
  std::size_t width = 0, height = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool operator==(const Raster&) const = default;
};

/// 64-bit FNV-1a over the raster geometry and bytes, as 16 hex digits.
inline std::string raster_checksum(const Raster& r) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  for (std::uint64_t v : {std::uint64_t(r.width), std::uint64_t(r.height), std::uint64_t(r.channels)})
    for (int i = 0; i < 8; ++i) mix(static_cast<std::uint8_t>(v >> (8 * i)));
  for (std::uint8_t b : r.pixels) mix(b);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Raster roles within a scene, in a fixed order.
inline constexpr std::array<std::string_view, 5> kRasterKinds = {"t1", "t2", "seg_t1", "seg_t2", "cd"};

struct SceneSet {
  std::string id = "scene";
  Raster image_t1, image_t2;
  Raster seg_label_t1, seg_label_t2, change_label;

  const Raster& raster(std::string_view kind) const {
    if (kind == "t1") return image_t1;
    if (kind == "t2") return image_t2;
    if (kind == "seg_t1") return seg_label_t1;
    if (kind == "seg_t2") return seg_label_t2;
    if (kind == "cd") return change_label;
    throw DataError("unknown raster kind " + std::string(kind));
  }
  Raster& raster(std::string_view kind) { return const_cast<Raster&>(std::as_const(*this).raster(kind)); }

  std::size_t width() const { return image_t1.width; }
  std::size_t height() const { return image_t1.height; }

  /// Same dimensions everywhere, 3-channel images, 1-channel {0,255} labels.
  void validate() const {
    for (auto kind : kRasterKinds) {
      const Raster& r = raster(kind);
      if (r.width != width() || r.height != height())
        throw DataError("scene " + id + ": raster " + std::string(kind) + " is " + std::to_string(r.width) + "x" +
                        std::to_string(r.height) + ", expected " + std::to_string(width()) + "x" +
                        std::to_string(height()));
      const bool image = kind == "t1" || kind == "t2";
      if (r.channels != (image ? 3u : 1u))
        throw DataError("scene " + id + ": raster " + std::string(kind) + " has " + std::to_string(r.channels) +
                        " channels");
      if (!image)
        for (std::uint8_t v : r.pixels)
          if (v != 0 && v != 255) throw DataError("scene " + id + ": label " + std::string(kind) + " is not {0,255}");
    }
    if (width() == 0 || height() == 0) throw DataError("scene " + id + " is empty");
  }

  bool operator==(const SceneSet&) const = default;

  std::map<std::string, std::string> checksums() const {
    std::map<std::string, std::string> out;
    for (auto kind : kRasterKinds) out.emplace(kind, raster_checksum(raster(kind)));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Tiling and splitting

enum class Split { train, val, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}
inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split: " + std::string(s));
}

struct TileRecord {
  std::string scene_id;
  std::size_t x0 = 0, y0 = 0;
  std::size_t size = 256;
  Split split = Split::train;
  bool operator==(const TileRecord&) const = default;
};

/// Row-major ceil(width/tile) x ceil(height/tile) grid; edge tiles extend
/// into zero padding on the right and bottom.
inline std::vector<TileRecord> tile_scene(std::size_t width, std::size_t height, std::size_t tile,
                                          const std::string& scene_id = "scene") {
  if (width == 0 || height == 0 || tile == 0) throw ConfigError("tile_scene: width, height and tile must be positive");
  const std::size_t nx = (width + tile - 1) / tile, ny = (height + tile - 1) / tile;
  std::vector<TileRecord> out;
  out.reserve(nx * ny);
  for (std::size_t ty = 0; ty < ny; ++ty)
    for (std::size_t tx = 0; tx < nx; ++tx) out.push_back({scene_id, tx * tile, ty * tile, tile, Split::train});
  return out;
}

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
  void validate() const {
    if (!(train >= 0 && val >= 0 && test >= 0) || std::abs(train + val + test - 1.0) > 1e-9)
      throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  bool operator==(const SplitRatios&) const = default;
};

/// Unbiased integer in [0, n) from a 64-bit engine. Unlike
/// std::uniform_int_distribution the result is identical across standard libraries.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % n;
}

/// splitmix64 finaliser; derives independent stream seeds from (seed, a, b).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(seed) ^ a) ^ b);
}

template <class V>
void seeded_shuffle(V& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

struct SceneInfo {
  std::string id;
  std::size_t width = 0, height = 0;
  std::map<std::string, std::string> checksums;
  bool operator==(const SceneInfo&) const = default;
};

struct Manifest {
  int version = 1;
  std::uint64_t seed = 0;
  std::size_t tile_size = 256;
  SplitRatios ratios;
  std::vector<SceneInfo> scenes;
  std::vector<TileRecord> records;

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [s](auto& r) { return r.split == s; }));
  }
  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].split == s) out.push_back(i);
    return out;
  }
  const SceneInfo* scene(const std::string& id) const {
    for (const auto& s : scenes)
      if (s.id == id) return &s;
    return nullptr;
  }
  bool operator==(const Manifest&) const = default;
};

/// Seeded uniform split. Validation and test sizes are floor(n * ratio); the
/// remainder goes to training. Records keep their input order.
inline Manifest split_manifest(std::vector<TileRecord> tiles, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  const std::size_t needed = (ratios.train > 0) + (ratios.val > 0) + (ratios.test > 0);
  if (tiles.size() < needed)
    throw DataError("split_manifest: " + std::to_string(tiles.size()) + " tiles cannot fill " + std::to_string(needed) +
                    " splits");
  const std::size_t n = tiles.size();
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.val + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, 0x5b117));
  seeded_shuffle(perm, rng);
  for (std::size_t k = 0; k < n; ++k)
    tiles[perm[k]].split = k < n_val ? Split::val : k < n_val + n_test ? Split::test : Split::train;
  Manifest m;
  m.seed = seed;
  m.tile_size = tiles.front().size;
  m.ratios = ratios;
  m.records = std::move(tiles);
  return m;
}

inline nlohmann::json to_json(const Manifest& m) {
  nlohmann::json scenes = nlohmann::json::array(), records = nlohmann::json::array();
  for (const auto& s : m.scenes)
    scenes.push_back({{"id", s.id}, {"width", s.width}, {"height", s.height}, {"checksums", s.checksums}});
  for (const auto& r : m.records)
    records.push_back({{"scene_id", r.scene_id}, {"x0", r.x0}, {"y0", r.y0}, {"split", to_string(r.split)}});
  return {{"version", m.version},
          {"seed", m.seed},
          {"tile_size", m.tile_size},
          {"ratios", {m.ratios.train, m.ratios.val, m.ratios.test}},
          {"counts", {{"train", m.count(Split::train)}, {"val", m.count(Split::val)}, {"test", m.count(Split::test)}}},
          {"scenes", scenes},
          {"records", records}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    Manifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw DataError("unsupported manifest version " + std::to_string(m.version));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.tile_size = j.at("tile_size").get<std::size_t>();
    const auto r = j.at("ratios").get<std::vector<double>>();
    if (r.size() != 3) throw DataError("manifest ratios must have three entries");
    m.ratios = {r[0], r[1], r[2]};
    for (const auto& s : j.at("scenes"))
      m.scenes.push_back({s.at("id").get<std::string>(), s.at("width").get<std::size_t>(),
                          s.at("height").get<std::size_t>(),
                          s.at("checksums").get<std::map<std::string, std::string>>()});
    for (const auto& rec : j.at("records"))
      m.records.push_back({rec.at("scene_id").get<std::string>(), rec.at("x0").get<std::size_t>(),
                           rec.at("y0").get<std::size_t>(), m.tile_size,
                           split_from_string(rec.at("split").get<std::string>())});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << to_json(m).dump(1) << '\n';
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  try {
    return manifest_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
}

/// Tiles every scene and splits the union of their tiles.
inline Manifest build_manifest(const std::vector<SceneInfo>& scenes, std::size_t tile, const SplitRatios& ratios,
                               std::uint64_t seed) {
  std::vector<TileRecord> tiles;
  for (const auto& s : scenes) {
    auto t = tile_scene(s.width, s.height, tile, s.id);
    tiles.insert(tiles.end(), t.begin(), t.end());
  }
  Manifest m = split_manifest(std::move(tiles), ratios, seed);
  m.scenes = scenes;
  return m;
}

inline SceneInfo describe(const SceneSet& s) { return {s.id, s.width(), s.height(), s.checksums()}; }

// ---------------------------------------------------------------------------
// Samples

/// Images are (3,S,S) in [0,1]; labels are (1,S,S) in {0,1}.
template <std::floating_point T>
struct BitemporalSample {
  Tensor<T> img_t1, img_t2, y_cd, y_t1, y_t2;
  bool operator==(const BitemporalSample&) const = default;

  template <class F>
  void for_each(F&& f) {
    for (Tensor<T>* t : {&img_t1, &img_t2, &y_cd, &y_t1, &y_t2}) f(*t);
  }
};

/// HWC 8-bit raster -> CHW tensor divided by 255 (label value 255 becomes 1).
template <std::floating_point T>
Tensor<T> to_tensor(const Raster& r) {
  Tensor<T> out({r.channels, r.height, r.width});
  const std::size_t plane = r.height * r.width;
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < r.channels; ++c)
      out[c * plane + p] = static_cast<T>(r.pixels[p * r.channels + c]) / T(255);
  return out;
}

/// Provides the five rasters of a tile.
class TileSource {
 public:
  virtual ~TileSource() = default;
  /// Raster `kind` of the tile, S x S, zero beyond the scene edge.
  virtual Raster tile(const TileRecord& rec, std::string_view kind) const = 0;
};

/// The S x S window of `r` at the record's origin, zero beyond the edge.
inline Raster cut_tile(const Raster& r, const TileRecord& rec) {
  if (rec.x0 >= r.width || rec.y0 >= r.height) throw DataError("tile origin outside scene " + rec.scene_id);
  Raster out(rec.size, rec.size, r.channels);
  const std::size_t w = std::min(rec.size, r.width - rec.x0);
  for (std::size_t y = 0; y < rec.size && rec.y0 + y < r.height; ++y)
    std::copy_n(&r.pixels[((rec.y0 + y) * r.width + rec.x0) * r.channels], w * r.channels,
                &out.pixels[y * rec.size * r.channels]);
  return out;
}

/// Tiles cut from scenes held in memory; checksums are verified against the
/// manifest when the source is built.
class SceneTileSource : public TileSource {
 public:
  SceneTileSource(const Manifest& m, std::vector<SceneSet> scenes) {
    for (auto& s : scenes) {
      s.validate();
      const SceneInfo* info = m.scene(s.id);
      if (!info) throw DataError("scene " + s.id + " is not listed in the manifest");
      if (info->width != s.width() || info->height != s.height())
        throw DataError("scene " + s.id + " dimensions differ from the manifest");
      const auto sums = s.checksums();
      for (const auto& [kind, sum] : info->checksums) {
        auto it = sums.find(kind);
        if (it == sums.end() || it->second != sum)
          throw DataError("checksum mismatch for scene " + s.id + " raster " + kind + ": manifest " + sum +
                          ", data " + (it == sums.end() ? std::string("missing") : it->second));
      }
      std::string id = s.id;
      scenes_.emplace(std::move(id), std::move(s));
    }
  }

  Raster tile(const TileRecord& rec, std::string_view kind) const override {
    auto it = scenes_.find(rec.scene_id);
    if (it == scenes_.end()) throw DataError("no scene " + rec.scene_id);
    return cut_tile(it->second.raster(kind), rec);
  }

  const SceneSet& scene(const std::string& id) const { return scenes_.at(id); }

 private:
  std::map<std::string, SceneSet> scenes_;
};

template <std::floating_point T>
BitemporalSample<T> load_sample(const TileSource& src, const TileRecord& rec) {
  auto grab = [&](std::string_view kind) {
    const Raster r = src.tile(rec, kind);
    if (r.width != rec.size || r.height != rec.size) throw DataError("tile source returned a mis-sized tile");
    return to_tensor<T>(r);
  };
  BitemporalSample<T> s;
  s.img_t1 = grab("t1");
  s.img_t2 = grab("t2");
  s.y_cd = grab("cd");
  s.y_t1 = grab("seg_t1");
  s.y_t2 = grab("seg_t2");
  return s;
}

// ---------------------------------------------------------------------------
// Augmentation

/// Counter-clockwise quarter turns, then an optional horizontal flip
/// (mirror columns), then an optional vertical flip (mirror rows).
struct AugmentOp {
  int rot_quarter = 0;
  bool hflip = false;
  bool vflip = false;

  bool is_identity() const { return rot_quarter == 0 && !hflip && !vflip; }
  int index() const { return rot_quarter | (hflip ? 4 : 0) | (vflip ? 8 : 0); }
  static AugmentOp from_index(int i) { return {i & 3, (i & 4) != 0, (i & 8) != 0}; }
  bool operator==(const AugmentOp&) const = default;
};

/// Source pixel (row, col) read by output pixel (i, j) of an n x n tile.
inline std::pair<std::size_t, std::size_t> augment_source(const AugmentOp& op, std::size_t i, std::size_t j,
                                                          std::size_t n) {
  // Undo the steps in reverse order.
  if (op.vflip) i = n - 1 - i;
  if (op.hflip) j = n - 1 - j;
  for (int k = 0; k < (op.rot_quarter & 3); ++k) {
    // One CCW turn: out(i, j) = in(j, n-1-i).
    const std::size_t si = j, sj = n - 1 - i;
    i = si;
    j = sj;
  }
  return {i, j};
}

template <std::floating_point T>
Tensor<T> augment_tensor(const Tensor<T>& t, const AugmentOp& op) {
  if (op.is_identity()) return t;
  if (t.rank() != 3 || t.dim(1) != t.dim(2)) throw ShapeError("augment: expected a square (C,S,S) tensor");
  const std::size_t c = t.dim(0), n = t.dim(1);
  Tensor<T> out(t.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const auto [si, sj] = augment_source(op, i, j, n);
      for (std::size_t k = 0; k < c; ++k) out[(k * n + i) * n + j] = t[(k * n + si) * n + sj];
    }
  return out;
}

template <std::floating_point T>
BitemporalSample<T> augment(BitemporalSample<T> s, const AugmentOp& op) {
  s.for_each([&](Tensor<T>& t) { t = augment_tensor(t, op); });
  return s;
}

/// Op applying `first` then `second`.
inline AugmentOp compose(const AugmentOp& first, const AugmentOp& second) {
  // Identify the composite by where it sends three reference pixels of a 3x3 grid.
  auto key = [](auto&& src) {
    std::array<std::pair<std::size_t, std::size_t>, 3> k{src(0, 0), src(0, 1), src(1, 0)};
    return k;
  };
  const auto target = key([&](std::size_t i, std::size_t j) {
    const auto [a, b] = augment_source(second, i, j, 3);
    return augment_source(first, a, b, 3);
  });
  for (int idx = 0; idx < 16; ++idx) {
    const AugmentOp cand = AugmentOp::from_index(idx);
    if (key([&](std::size_t i, std::size_t j) { return augment_source(cand, i, j, 3); }) == target) return cand;
  }
  throw std::logic_error("augment ops are not closed under composition");
}

inline AugmentOp inverse(const AugmentOp& op) {
  for (int idx = 0; idx < 16; ++idx) {
    const AugmentOp cand = AugmentOp::from_index(idx);
    if (compose(op, cand).is_identity()) return cand;
  }
  throw std::logic_error("augment op has no inverse");
}

/// Uniform over the 16 (rotation, hflip, vflip) combinations; identity when disabled.
inline AugmentOp sample_augment_op(std::mt19937_64& rng, bool enabled = true) {
  if (!enabled) return {};
  return AugmentOp::from_index(static_cast<int>(uniform_index(rng, 16)));
}

// ---------------------------------------------------------------------------
// Batches

template <std::floating_point T>
struct Batch {
  Tensor<T> img_t1, img_t2, y_cd, y_t1, y_t2;  // (B,C,S,S)
  std::vector<std::size_t> records;            // manifest indices
  std::vector<AugmentOp> ops;
  std::size_t size() const { return records.size(); }
};

template <std::floating_point T>
Batch<T> stack(const std::vector<BitemporalSample<T>>& samples) {
  Batch<T> b;
  if (samples.empty()) return b;
  auto cat = [&](auto member) {
    const Tensor<T>& first = samples[0].*member;
    Shape s{samples.size()};
    s.insert(s.end(), first.shape().begin(), first.shape().end());
    Tensor<T> out(s);
    for (std::size_t i = 0; i < samples.size(); ++i)
      std::copy(((samples[i]).*member).storage().begin(), ((samples[i]).*member).storage().end(),
                out.storage().begin() + static_cast<std::ptrdiff_t>(i * first.numel()));
    return out;
  };
  b.img_t1 = cat(&BitemporalSample<T>::img_t1);
  b.img_t2 = cat(&BitemporalSample<T>::img_t2);
  b.y_cd = cat(&BitemporalSample<T>::y_cd);
  b.y_t1 = cat(&BitemporalSample<T>::y_t1);
  b.y_t2 = cat(&BitemporalSample<T>::y_t2);
  return b;
}

struct BatchOptions {
  std::size_t batch = 16;
  std::uint64_t seed = 0;
  bool augment = false;
  std::size_t workers = 1;
};

/// Random-access view of one split as a sequence of batches. Training order
/// is reshuffled every epoch; validation and test keep manifest order. The
/// last partial batch is kept. A batch depends only on (manifest, split,
/// options, epoch, index), never on worker scheduling.
template <std::floating_point T>
class BatchIterator {
 public:
  BatchIterator(const TileSource& src, const Manifest& m, Split split, BatchOptions opt)
      : src_(&src), manifest_(&m), split_(split), opt_(opt), base_(m.indices(split)) {
    if (opt_.batch == 0) throw ConfigError("batch size must be at least 1");
    if (base_.empty()) throw DataError("split " + std::string(to_string(split)) + " is empty");
    if (opt_.workers == 0) opt_.workers = 1;
  }

  std::size_t num_samples() const { return base_.size(); }
  std::size_t num_batches() const { return (base_.size() + opt_.batch - 1) / opt_.batch; }

  /// Manifest indices in the order visited during `epoch`.
  std::vector<std::size_t> order(std::size_t epoch) const {
    std::vector<std::size_t> o = base_;
    if (split_ == Split::train) {
      std::mt19937_64 rng(derive_seed(opt_.seed, 0xba7c4, epoch));
      seeded_shuffle(o, rng);
    }
    return o;
  }

  /// Augmentation applied to a record in an epoch (identity unless training with augmentation on).
  AugmentOp op_for(std::size_t epoch, std::size_t record) const {
    std::mt19937_64 rng(derive_seed(opt_.seed ^ 0xa06ULL, epoch, record));
    return sample_augment_op(rng, opt_.augment && split_ == Split::train);
  }

  Batch<T> batch(std::size_t epoch, std::size_t index) const {
    if (index >= num_batches()) throw std::out_of_range("batch index out of range");
    const auto o = order(epoch);
    const std::size_t begin = index * opt_.batch, end = std::min(o.size(), begin + opt_.batch);
    std::vector<BitemporalSample<T>> samples(end - begin);
    std::vector<AugmentOp> ops(end - begin);
    auto work = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t rec = o[begin + k];
        ops[k] = op_for(epoch, rec);
        samples[k] = augment(load_sample<T>(*src_, manifest_->records[rec]), ops[k]);
      }
    };
    const std::size_t n = samples.size(), w = std::min(opt_.workers, n);
    if (w <= 1) {
      work(0, n);
    } else {
      std::vector<std::future<void>> jobs;
      for (std::size_t t = 0; t < w; ++t) jobs.push_back(std::async(std::launch::async, work, n * t / w, n * (t + 1) / w));
      for (auto& j : jobs) j.get();
    }
    Batch<T> b = stack(samples);
    b.records.assign(o.begin() + static_cast<std::ptrdiff_t>(begin), o.begin() + static_cast<std::ptrdiff_t>(end));
    b.ops = std::move(ops);
    return b;
  }

  Split split() const { return split_; }
  const BatchOptions& options() const { return opt_; }

 private:
  const TileSource* src_;
  const Manifest* manifest_;
  Split split_;
  BatchOptions opt_;
  std::vector<std::size_t> base_;
};

}  // namespace dtcd

#endif  // DTCD_DATAPIPE_HPP
