#ifndef DTCD_SYNTHETIC_HPP
#define DTCD_SYNTHETIC_HPP

// Procedural bitemporal scenes: textured ground with rectangular and round
// "buildings", some of which appear or disappear between the two epochs.
// Labels are exact, so y_cd == y_t1 XOR y_t2 everywhere.

#include <cstdint>
#include <optional>
#include <random>

#include "dtcd/datapipe.hpp"

namespace dtcd {

struct SyntheticOptions {
  std::size_t tiles_x = 4, tiles_y = 4;
  std::size_t tile = 64;
  std::size_t buildings_per_tile = 4;
  double p_removed = 0.25;  // t1 building absent at t2
  std::size_t new_per_tile = 2;
  std::uint64_t seed = 0;
  std::string id = "synthetic";
  /// Building half-extent range as a fraction of the tile size.
  double min_extent = 0.07, max_extent = 0.16;
  bool operator==(const SyntheticOptions&) const = default;
};

namespace detail {

struct Shape2D {
  bool round;
  double cy, cx, hy, hx;
  std::uint8_t r, g, b;
  bool contains(double y, double x) const {
    const double dy = (y - cy) / hy, dx = (x - cx) / hx;
    return round ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
  }
};

inline Shape2D random_building(std::mt19937_64& rng, double y0, double x0, double tile, double e_lo, double e_hi) {
  std::uniform_real_distribution<double> pos(0.15, 0.85), ext(e_lo, e_hi), roof(150, 250);
  std::bernoulli_distribution round(0.3);
  return {round(rng),
          y0 + pos(rng) * tile,
          x0 + pos(rng) * tile,
          ext(rng) * tile,
          ext(rng) * tile,
          static_cast<std::uint8_t>(roof(rng)),
          static_cast<std::uint8_t>(roof(rng) * 0.8),
          static_cast<std::uint8_t>(roof(rng) * 0.6)};
}

inline void paint(SceneSet& s, bool second, const Shape2D& b) {
  Raster& img = second ? s.image_t2 : s.image_t1;
  Raster& lab = second ? s.seg_label_t2 : s.seg_label_t1;
  const auto y_lo = static_cast<std::size_t>(std::max(0.0, b.cy - b.hy - 1));
  const auto x_lo = static_cast<std::size_t>(std::max(0.0, b.cx - b.hx - 1));
  const auto y_hi = std::min<std::size_t>(img.height, static_cast<std::size_t>(b.cy + b.hy + 2));
  const auto x_hi = std::min<std::size_t>(img.width, static_cast<std::size_t>(b.cx + b.hx + 2));
  for (std::size_t y = y_lo; y < y_hi; ++y)
    for (std::size_t x = x_lo; x < x_hi; ++x)
      if (b.contains(static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5)) {
        img.at(y, x, 0) = b.r;
        img.at(y, x, 1) = b.g;
        img.at(y, x, 2) = b.b;
        lab.at(y, x) = 255;
      }
}

}  // namespace detail

inline SceneSet make_synthetic_scene(const SyntheticOptions& o) {
  const std::size_t w = o.tiles_x * o.tile, h = o.tiles_y * o.tile;
  SceneSet s;
  s.id = o.id;
  s.image_t1 = Raster(w, h, 3);
  s.image_t2 = Raster(w, h, 3);
  s.seg_label_t1 = Raster(w, h, 1);
  s.seg_label_t2 = Raster(w, h, 1);
  s.change_label = Raster(w, h, 1);
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> noise(0.0, 12.0);
  // Ground: dark green-grey with independent per-epoch noise (seasonal/radiometric change).
  for (Raster* img : {&s.image_t1, &s.image_t2})
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double base[3] = {70, 95, 60};
        for (std::size_t c = 0; c < 3; ++c)
          img->at(y, x, c) = static_cast<std::uint8_t>(std::clamp(base[c] + noise(rng), 0.0, 255.0));
      }
  std::bernoulli_distribution removed(o.p_removed);
  for (std::size_t ty = 0; ty < o.tiles_y; ++ty)
    for (std::size_t tx = 0; tx < o.tiles_x; ++tx) {
      const double y0 = static_cast<double>(ty * o.tile), x0 = static_cast<double>(tx * o.tile);
      const double t = static_cast<double>(o.tile);
      std::vector<detail::Shape2D> placed;
      // Buildings keep a gap of `kGap` pixels, so every colour change in the
      // image pair is also a label change.
      auto place = [&]() -> std::optional<detail::Shape2D> {
        constexpr double kGap = 2.0;
        for (int attempt = 0; attempt < 64; ++attempt) {
          const auto b = detail::random_building(rng, y0, x0, t, o.min_extent, o.max_extent);
          const bool clear = std::none_of(placed.begin(), placed.end(), [&](const detail::Shape2D& q) {
            return std::abs(b.cy - q.cy) < b.hy + q.hy + kGap && std::abs(b.cx - q.cx) < b.hx + q.hx + kGap;
          });
          if (clear) {
            placed.push_back(b);
            return b;
          }
        }
        return std::nullopt;
      };
      for (std::size_t k = 0; k < o.buildings_per_tile; ++k)
        if (const auto b = place()) {
          detail::paint(s, false, *b);
          if (!removed(rng)) detail::paint(s, true, *b);
        }
      for (std::size_t k = 0; k < o.new_per_tile; ++k)
        if (const auto b = place()) detail::paint(s, true, *b);
    }
  for (std::size_t i = 0; i < s.change_label.pixels.size(); ++i)
    s.change_label.pixels[i] = s.seg_label_t1.pixels[i] != s.seg_label_t2.pixels[i] ? 255 : 0;
  return s;
}

}  // namespace dtcd

#endif  // DTCD_SYNTHETIC_HPP
