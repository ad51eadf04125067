#ifndef DTCD_METRICS_HPP
#define DTCD_METRICS_HPP

// Pixel confusion counts, precision/recall/F1/IoU, post-classification
// comparison and label-subtraction divergence.

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dtcd/datapipe.hpp"

namespace dtcd {

/// Binary map; bits hold 0 or 1.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  explicit Mask(Shape s, std::uint8_t fill = 0) : shape(std::move(s)), bits(shape_numel(shape), fill) {}
  std::size_t size() const { return bits.size(); }
  std::size_t ones() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }
  bool operator==(const Mask&) const = default;
};

/// 1 where p >= tau.
template <std::floating_point T>
Mask binarize(const Tensor<T>& p, double tau = 0.5) {
  if (!(tau > 0 && tau < 1)) throw ConfigError("binarize: tau must lie in (0,1)");
  Mask m(p.shape());
  for (std::size_t i = 0; i < p.numel(); ++i) m.bits[i] = static_cast<double>(p[i]) >= tau ? 1 : 0;
  return m;
}

/// Label tensor with values {0,1} -> Mask.
template <std::floating_point T>
Mask to_mask(const Tensor<T>& y) {
  Mask m(y.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) {
    if (y[i] != T(0) && y[i] != T(1)) throw DataError("label map is not binary");
    m.bits[i] = y[i] != T(0);
  }
  return m;
}

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts merge(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline void check_masks(const Mask& a, const Mask& b, const char* what) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
  for (const Mask* m : {&a, &b})
    for (auto v : m->bits)
      if (v > 1) throw DataError(std::string(what) + ": input is not binary");
}

inline ConfusionCounts accumulate(const Mask& pred, const Mask& label) {
  check_masks(pred, label, "accumulate");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int k = pred.bits[i] * 2 + label.bits[i];
    c.tn += k == 0;
    c.fn += k == 1;
    c.fp += k == 2;
    c.tp += k == 3;
  }
  return c;
}

struct MetricReport {
  double precision = 0, recall = 0, f1 = 0, iou = 0;
  // Degenerate-case flags; values are 0 for an empty denominator except in
  // the all-true-negative case, which reports 1 everywhere.
  bool all_true_negative = false;
  bool precision_undefined = false, recall_undefined = false, f1_undefined = false, iou_undefined = false;
  ConfusionCounts counts;

  std::string flags() const {
    std::vector<std::string> f;
    if (all_true_negative) f.push_back("all_true_negative");
    if (precision_undefined) f.push_back("precision_undefined");
    if (recall_undefined) f.push_back("recall_undefined");
    if (f1_undefined) f.push_back("f1_undefined");
    if (iou_undefined) f.push_back("iou_undefined");
    std::string out;
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "|" : "") + f[i];
    return out;
  }
  bool operator==(const MetricReport&) const = default;
};

inline MetricReport compute_metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw DataError("compute_metrics: no pixels were evaluated");
  MetricReport r;
  r.counts = c;
  if (c.tp + c.fp + c.fn == 0) {
    r.precision = r.recall = r.f1 = r.iou = 1.0;
    r.all_true_negative = true;
    return r;
  }
  const auto d = [](std::uint64_t v) { return static_cast<double>(v); };
  if (c.tp + c.fp) r.precision = d(c.tp) / d(c.tp + c.fp);
  else r.precision_undefined = true;
  if (c.tp + c.fn) r.recall = d(c.tp) / d(c.tp + c.fn);
  else r.recall_undefined = true;
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  else r.f1_undefined = true;
  r.iou = d(c.tp) / d(c.tp + c.fp + c.fn);
  return r;
}

/// F1 and IoU implied by a (precision, recall) pair.
struct PrDerived {
  double f1, iou;
};
inline PrDerived derive_from_pr(double precision, double recall) {
  const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  return {f1, f1 / (2 - f1)};
}

/// Change map from two classification maps: 1 where they differ.
inline Mask post_classification_compare(const Mask& seg1, const Mask& seg2) {
  check_masks(seg1, seg2, "post_classification_compare");
  Mask out(seg1.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.bits[i] = seg1.bits[i] ^ seg2.bits[i];
  return out;
}

struct DivergenceReport {
  std::uint64_t pixels_agreeing = 0;       // changed in both the subtracted map and y_cd
  std::uint64_t pixels_subtract_only = 0;  // changed only in y_t1 XOR y_t2
  std::uint64_t pixels_label_only = 0;     // changed only in y_cd
  std::uint64_t pixels_unchanged = 0;      // unchanged in both
  double iou_vs_reference = 1.0;
  bool operator==(const DivergenceReport&) const = default;
};

/// Compares y_t1 XOR y_t2 with the change label y_cd.
inline DivergenceReport label_divergence(const Mask& y_t1, const Mask& y_t2, const Mask& y_cd) {
  check_masks(y_t1, y_cd, "label_divergence");
  const Mask sub = post_classification_compare(y_t1, y_t2);
  const ConfusionCounts c = accumulate(sub, y_cd);
  return {c.tp, c.fp, c.fn, c.tn, compute_metrics(c).iou};
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline nlohmann::json to_json(const MetricReport& r) {
  return {{"recall", r.recall},
          {"precision", r.precision},
          {"f1", r.f1},
          {"iou", r.iou},
          {"degenerate_flags", r.flags()},
          {"counts", to_json(r.counts)}};
}

inline nlohmann::json to_json(const DivergenceReport& d) {
  return {{"pixels_agreeing", d.pixels_agreeing},
          {"pixels_subtract_only", d.pixels_subtract_only},
          {"pixels_label_only", d.pixels_label_only},
          {"pixels_unchanged", d.pixels_unchanged},
          {"iou_vs_reference", d.iou_vs_reference}};
}

inline std::string metrics_csv_header() { return "run_id,split,tau,recall,precision,f1,iou,degenerate_flags"; }

inline std::string metrics_csv_row(const std::string& run_id, const std::string& split, double tau,
                                   const MetricReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << run_id << ',' << split << ',' << tau << ',' << r.recall << ',' << r.precision << ',' << r.f1 << ',' << r.iou
     << ',' << r.flags();
  return os.str();
}

/// Plane `index` of an (N,1,H,W) mask as a {0,255} raster.
inline Raster mask_to_raster(const Mask& m, std::size_t index = 0) {
  if (m.shape.size() != 4 || m.shape[1] != 1) throw ShapeError("mask_to_raster: expected (N,1,H,W)");
  const std::size_t h = m.shape[2], w = m.shape[3];
  Raster r(w, h, 1);
  for (std::size_t i = 0; i < h * w; ++i) r.pixels[i] = m.bits[index * h * w + i] ? 255 : 0;
  return r;
}

/// RGB overlay: TP white, FP red, FN blue, TN black.
inline Raster overlay_raster(const Mask& pred, const Mask& label, std::size_t index = 0) {
  check_masks(pred, label, "overlay_raster");
  if (pred.shape.size() != 4 || pred.shape[1] != 1) throw ShapeError("overlay_raster: expected (N,1,H,W)");
  const std::size_t h = pred.shape[2], w = pred.shape[3];
  Raster r(w, h, 3);
  for (std::size_t i = 0; i < h * w; ++i) {
    const bool p = pred.bits[index * h * w + i], l = label.bits[index * h * w + i];
    std::uint8_t* px = &r.pixels[i * 3];
    if (p && l) px[0] = px[1] = px[2] = 255;
    else if (p) px[0] = 255;
    else if (l) px[2] = 255;
  }
  return r;
}

}  // namespace dtcd

#endif  // DTCD_METRICS_HPP
