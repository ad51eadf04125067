#ifndef DTCD_RASTER_IO_HPP
#define DTCD_RASTER_IO_HPP

// PNG / GeoTIFF reading and PNG writing through OpenCV, plus the on-disk tile
// cache. Requires linking the dtcd_raster_io target.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "dtcd/datapipe.hpp"

namespace dtcd {

/// Reads an 8-bit raster. Colour images come back as RGB; a 4th (alpha)
/// channel is dropped. With `channels` = 1, a colour file whose channels are
/// all equal is accepted as single-channel.
inline Raster read_raster(const std::filesystem::path& path, std::size_t channels) {
  if (!std::filesystem::exists(path)) throw DataError("raster not found: " + path.string());
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw DataError("cannot decode raster " + path.string());
  if (m.depth() != CV_8U) throw DataError("raster " + path.string() + " is not 8-bit");
  const auto file_channels = static_cast<std::size_t>(m.channels());
  const bool colour = file_channels >= 3;
  if (file_channels != channels && !(colour && (channels == 1 || channels == 3)))
    throw DataError("raster " + path.string() + " has " + std::to_string(file_channels) + " channels, expected " +
                    std::to_string(channels));
  Raster r(static_cast<std::size_t>(m.cols), static_cast<std::size_t>(m.rows), channels);
  for (int y = 0; y < m.rows; ++y) {
    const std::uint8_t* src = m.ptr<std::uint8_t>(y);
    std::uint8_t* dst = &r.pixels[static_cast<std::size_t>(y) * r.width * channels];
    for (std::size_t x = 0; x < r.width; ++x, src += file_channels, dst += channels) {
      if (!colour) {
        dst[0] = src[0];
      } else if (channels == 1) {
        if (src[0] != src[1] || src[0] != src[2])
          throw DataError("label raster " + path.string() + " has differing colour channels");
        dst[0] = src[0];
      } else {  // OpenCV stores BGR(A)
        dst[0] = src[2];
        dst[1] = src[1];
        dst[2] = src[0];
      }
    }
  }
  return r;
}

inline void write_png(const Raster& r, const std::filesystem::path& path) {
  if (r.channels != 1 && r.channels != 3) throw DataError("write_png: unsupported channel count");
  cv::Mat out(static_cast<int>(r.height), static_cast<int>(r.width), r.channels == 1 ? CV_8UC1 : CV_8UC3);
  for (std::size_t y = 0; y < r.height; ++y) {
    std::uint8_t* dst = out.ptr<std::uint8_t>(static_cast<int>(y));
    const std::uint8_t* src = &r.pixels[y * r.width * r.channels];
    for (std::size_t x = 0; x < r.width; ++x)
      for (std::size_t c = 0; c < r.channels; ++c)
        dst[x * r.channels + c] = src[x * r.channels + (r.channels == 3 ? 2 - c : c)];
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) throw DataError("cannot write " + path.string());
}

inline std::string tile_file_name(const TileRecord& rec, std::string_view kind) {
  return rec.scene_id + "_" + std::to_string(rec.x0) + "_" + std::to_string(rec.y0) + "_" + std::string(kind) + ".png";
}

inline constexpr const char* kCacheIndex = "cache_index.json";

/// Writes the tiles of one raster of `scene_id`. Lets a large scene be cached
/// one raster at a time.
inline void write_raster_tiles(const Raster& r, std::string_view kind, const std::string& scene_id, const Manifest& m,
                               const std::filesystem::path& dir) {
  for (const auto& rec : m.records)
    if (rec.scene_id == scene_id) write_png(cut_tile(r, rec), dir / tile_file_name(rec, kind));
}

/// Records a scene's raster checksums in the cache index.
inline void update_cache_index(const std::filesystem::path& dir, const std::string& scene_id,
                               const std::map<std::string, std::string>& checksums) {
  std::filesystem::create_directories(dir);
  nlohmann::json index = nlohmann::json::object();
  if (std::ifstream in(dir / kCacheIndex); in) index = nlohmann::json::parse(in, nullptr, false);
  if (index.is_discarded() || !index.is_object()) index = nlohmann::json::object();
  index[scene_id] = checksums;
  std::ofstream(dir / kCacheIndex) << index.dump(1) << '\n';
}

/// Writes every raster of every manifest tile of `scene` into `dir`.
inline void write_tile_cache(const SceneSet& scene, const Manifest& m, const std::filesystem::path& dir) {
  scene.validate();
  for (auto kind : kRasterKinds) write_raster_tiles(scene.raster(kind), kind, scene.id, m, dir);
  update_cache_index(dir, scene.id, scene.checksums());
}

/// Reads tiles from a cache directory written by write_tile_cache. The
/// cache index must carry the manifest's checksums for every scene.
class CachedTileSource : public TileSource {
 public:
  CachedTileSource(std::filesystem::path dir, const Manifest& m) : dir_(std::move(dir)) {
    std::ifstream in(dir_ / kCacheIndex);
    if (!in) throw DataError("tile cache " + dir_.string() + " has no " + kCacheIndex);
    const auto index = nlohmann::json::parse(in, nullptr, false);
    for (const auto& s : m.scenes) {
      if (index.is_discarded() || !index.contains(s.id))
        throw DataError("tile cache lacks scene " + s.id);
      if (index.at(s.id).get<std::map<std::string, std::string>>() != s.checksums)
        throw DataError("checksum mismatch between tile cache and manifest for scene " + s.id);
    }
  }
  Raster tile(const TileRecord& rec, std::string_view kind) const override {
    const bool image = kind == "t1" || kind == "t2";
    return read_raster(dir_ / tile_file_name(rec, kind), image ? 3 : 1);
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace dtcd

#endif  // DTCD_RASTER_IO_HPP
