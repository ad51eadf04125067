#ifndef DTCD_TRAINER_HPP
#define DTCD_TRAINER_HPP

// Training loop, ablation presets, evaluation, prediction and the
// post-classification comparison.
//
// Files written under TrainIo::out_dir (when set):
//   last.ckpt       parameters and Adam state after the final step
//   best.ckpt       snapshot with the highest validation change F1 seen
//   history.jsonl   one JSON object per step or evaluation
//   diagnostic.json written only when a non-finite loss aborts training

#include <array>
#include <chrono>
#include <climits>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "dtcd/checkpoint.hpp"
#include "dtcd/datapipe.hpp"
#include "dtcd/losses.hpp"
#include "dtcd/metrics.hpp"

namespace dtcd {

// ---------------------------------------------------------------------------
// Ablation presets

enum class AblationPreset { scdn, scdn_dam, scdn_dam_fl, scdn_dam_cdl, scdn_dam_cdl_ssn, scdn_dam_cdl_ssn_da };

inline constexpr std::array<AblationPreset, 6> kAblationOrder = {
    AblationPreset::scdn,         AblationPreset::scdn_dam,         AblationPreset::scdn_dam_fl,
    AblationPreset::scdn_dam_cdl, AblationPreset::scdn_dam_cdl_ssn, AblationPreset::scdn_dam_cdl_ssn_da};

inline std::string_view to_string(AblationPreset p) {
  switch (p) {
    case AblationPreset::scdn: return "SCDN";
    case AblationPreset::scdn_dam: return "SCDN_DAM";
    case AblationPreset::scdn_dam_fl: return "SCDN_DAM_FL";
    case AblationPreset::scdn_dam_cdl: return "SCDN_DAM_CDL";
    case AblationPreset::scdn_dam_cdl_ssn: return "SCDN_DAM_CDL_SSN";
    case AblationPreset::scdn_dam_cdl_ssn_da: return "SCDN_DAM_CDL_SSN_DA";
  }
  return "?";
}

/// Row label in an ablation table, e.g. "SCDN+DAM+CDL".
inline std::string table_label(AblationPreset p) {
  std::string s(to_string(p));
  std::replace(s.begin(), s.end(), '_', '+');
  return s;
}

inline AblationPreset preset_from_string(std::string_view s) {
  for (auto p : kAblationOrder)
    if (s == to_string(p) || s == table_label(p)) return p;
  throw ConfigError("unknown ablation preset: " + std::string(s));
}

struct PresetTraits {
  bool use_dam, use_ssn, augment;
  LossKind loss;
};

inline constexpr PresetTraits traits(AblationPreset p) {
  switch (p) {
    case AblationPreset::scdn: return {false, false, false, LossKind::bce};
    case AblationPreset::scdn_dam: return {true, false, false, LossKind::bce};
    case AblationPreset::scdn_dam_fl: return {true, false, false, LossKind::focal};
    case AblationPreset::scdn_dam_cdl: return {true, false, false, LossKind::cdl};
    case AblationPreset::scdn_dam_cdl_ssn: return {true, true, false, LossKind::cdl};
    case AblationPreset::scdn_dam_cdl_ssn_da: return {true, true, true, LossKind::cdl};
  }
  return {true, true, true, LossKind::cdl};
}

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  AblationPreset preset = AblationPreset::scdn_dam_cdl_ssn_da;
  ModelConfig model;
  LossConfig loss;
  AdamConfig adam;
  std::size_t batch = 16;
  std::uint64_t max_steps = 2000;
  std::uint64_t seed = 0;
  std::uint64_t checkpoint_every = 0;  // 0: only after the last step
  std::uint64_t eval_every = 0;        // 0: only after the last step
  std::size_t workers = 1;
  double tau = 0.5;
  /// Stop once training-set change F1 reaches this value (0 disables).
  double stop_at_train_f1 = 0;
  /// Set from the preset by resolve().
  bool augment = true;

  void validate() const {
    model.validate();
    loss.validate();
    adam.validate();
    if (batch == 0) throw ConfigError("train.batch must be at least 1");
    if (workers == 0) throw ConfigError("train.workers must be at least 1");
    if (!(tau > 0 && tau < 1)) throw ConfigError("eval.tau must lie in (0,1)");
    if (!(stop_at_train_f1 >= 0 && stop_at_train_f1 <= 1)) throw ConfigError("train.stop_at_train_f1 must lie in [0,1]");
    if (!model.use_ssn && loss.weights.alpha > 0)
      throw ConfigError("loss.alpha > 0 requires the segmentation branch");
  }
  bool operator==(const TrainConfig&) const = default;
};

/// Applies the preset's attention, loss kind, segmentation branch and
/// augmentation flags. SCDN and SCDN_DAM train with cross-entropy. Without the
/// segmentation branch alpha is forced to 0.
inline TrainConfig resolve(TrainConfig cfg) {
  const PresetTraits t = traits(cfg.preset);
  cfg.model.use_dam = t.use_dam;
  cfg.model.use_ssn = t.use_ssn;
  cfg.loss.kind = t.loss;
  cfg.augment = t.augment;
  if (!t.use_ssn) cfg.loss.weights.alpha = 0;
  cfg.validate();
  return cfg;
}

inline json to_json(const TrainConfig& c) {
  return {{"preset", std::string(to_string(c.preset))},
          {"batch", c.batch},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"eval_every", c.eval_every},
          {"workers", c.workers},
          {"stop_at_train_f1", c.stop_at_train_f1}};
}

// ---------------------------------------------------------------------------
// Run history

struct StepRecord {
  std::uint64_t step = 0;
  LossReport loss;
  double wall_seconds = 0;
};

struct EvalRecord {
  std::uint64_t step = 0;
  Split split = Split::val;
  MetricReport change;
  std::optional<MetricReport> segmentation;
  double wall_seconds = 0;
};

struct RunHistory {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;
};

inline json to_json(const LossReport& r) {
  return {{"l_ss_t1", r.l_ss_t1}, {"l_ss_t2", r.l_ss_t2}, {"l_cd", r.l_cd}, {"l_aux", r.l_aux}, {"total", r.total}};
}

inline json to_json(const StepRecord& s) {
  return {{"kind", "step"}, {"step", s.step}, {"loss", to_json(s.loss)}, {"wall_seconds", s.wall_seconds}};
}

inline json to_json(const EvalRecord& e) {
  json j = {{"kind", "eval"},
            {"step", e.step},
            {"split", std::string(to_string(e.split))},
            {"change", to_json(e.change)},
            {"wall_seconds", e.wall_seconds}};
  if (e.segmentation) j["segmentation"] = to_json(*e.segmentation);
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation and prediction

/// By default glibc serves large blocks with mmap and unmaps them on free,
/// so every step re-faults its activations; keeping them on the heap cuts
/// step time by about a third.
inline void tune_allocator() {
#ifdef __GLIBC__
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, INT_MAX);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)done;
#endif
}

struct EvalReport {
  MetricReport change;
  /// Both epochs' segmentation maps pooled; absent without the segmentation branch.
  std::optional<MetricReport> segmentation;
};

struct SplitCounts {
  ConfusionCounts change, segmentation;
};

/// Receives each evaluated batch with its thresholded maps; seg maps are
/// null without the segmentation branch.
template <std::floating_point T>
using BatchVisitor = std::function<void(const Batch<T>&, const Mask& change, const Mask* seg_t1, const Mask* seg_t2)>;

template <std::floating_point T>
SplitCounts count_split(const DualTaskNetwork<T>& net, const TileSource& src, const Manifest& m, Split split,
                        double tau, std::size_t batch = 16, std::size_t workers = 1,
                        const BatchVisitor<T>& visit = {}) {
  NoGradGuard ng;
  BatchIterator<T> it(src, m, split, {batch, 0, false, workers});
  SplitCounts c;
  for (std::size_t b = 0; b < it.num_batches(); ++b) {
    const Batch<T> bt = it.batch(0, b);
    const auto out = net.forward(Var<T>(bt.img_t1), Var<T>(bt.img_t2));
    const Mask change = binarize(out.change_prob.value(), tau);
    c.change += accumulate(change, to_mask(bt.y_cd));
    if (out.has_segmentation()) {
      const Mask s1 = binarize(out.seg_prob_t1.value(), tau), s2 = binarize(out.seg_prob_t2.value(), tau);
      c.segmentation += accumulate(s1, to_mask(bt.y_t1));
      c.segmentation += accumulate(s2, to_mask(bt.y_t2));
      if (visit) visit(bt, change, &s1, &s2);
    } else if (visit) {
      visit(bt, change, nullptr, nullptr);
    }
  }
  return c;
}

template <std::floating_point T>
EvalReport evaluate_split(const DualTaskNetwork<T>& net, const TileSource& src, const Manifest& m, Split split,
                          double tau, std::size_t batch = 16, std::size_t workers = 1,
                          const BatchVisitor<T>& visit = {}) {
  const auto c = count_split(net, src, m, split, tau, batch, workers, visit);
  EvalReport r{compute_metrics(c.change), std::nullopt};
  if (net.config().use_ssn) r.segmentation = compute_metrics(c.segmentation);
  return r;
}

template <std::floating_point T>
struct Prediction {
  Tensor<T> change_prob, seg_prob_t1, seg_prob_t2;  // seg maps empty without the segmentation branch
  Mask change, seg_t1, seg_t2;
};

/// Forward pass on (3,H,W) or (N,3,H,W) images followed by thresholding.
template <std::floating_point T>
Prediction<T> predict(const DualTaskNetwork<T>& net, Tensor<T> img_t1, Tensor<T> img_t2, double tau = 0.5) {
  if (!(tau > 0 && tau < 1)) throw ConfigError("predict: tau must lie in (0,1)");
  for (Tensor<T>* t : {&img_t1, &img_t2}) {
    if (t->rank() == 3) {
      Shape s{1};
      s.insert(s.end(), t->shape().begin(), t->shape().end());
      *t = Tensor<T>(s, std::move(t->storage()));
    }
    if (t->rank() != 4) throw ShapeError("predict: images must be (3,H,W) or (N,3,H,W)");
  }
  NoGradGuard ng;
  const auto out = net.forward(Var<T>(std::move(img_t1)), Var<T>(std::move(img_t2)));
  Prediction<T> p;
  p.change_prob = out.change_prob.value();
  p.change = binarize(p.change_prob, tau);
  if (out.has_segmentation()) {
    p.seg_prob_t1 = out.seg_prob_t1.value();
    p.seg_prob_t2 = out.seg_prob_t2.value();
    p.seg_t1 = binarize(p.seg_prob_t1, tau);
    p.seg_t2 = binarize(p.seg_prob_t2, tau);
  }
  return p;
}

struct RasterPrediction {
  Raster change, seg_t1, seg_t2;  // {0,255}; seg rasters empty without the segmentation branch
};

/// Predicts a whole image pair of any size by cutting it into zero-padded
/// `tile` windows, `batch` windows per forward pass.
template <std::floating_point T>
RasterPrediction predict_raster(const DualTaskNetwork<T>& net, const Raster& t1, const Raster& t2, std::size_t tile,
                                double tau = 0.5, std::size_t batch = 4) {
  if (t1.width != t2.width || t1.height != t2.height || t1.channels != t2.channels)
    throw ShapeError("predict: the two images differ in size or channel count");
  if (batch == 0) throw ConfigError("predict: batch must be at least 1");
  const auto windows = tile_scene(t1.width, t1.height, tile, "image");
  const bool ssn = net.config().use_ssn;
  RasterPrediction out{Raster(t1.width, t1.height, 1), ssn ? Raster(t1.width, t1.height, 1) : Raster(),
                       ssn ? Raster(t1.width, t1.height, 1) : Raster()};
  auto paste = [&](const Mask& m, std::size_t plane, const TileRecord& rec, Raster& dst) {
    for (std::size_t y = 0; y < tile && rec.y0 + y < dst.height; ++y)
      for (std::size_t x = 0; x < tile && rec.x0 + x < dst.width; ++x)
        dst.at(rec.y0 + y, rec.x0 + x) = m.bits[(plane * tile + y) * tile + x] ? 255 : 0;
  };
  for (std::size_t lo = 0; lo < windows.size(); lo += batch) {
    const std::size_t hi = std::min(windows.size(), lo + batch);
    std::vector<BitemporalSample<T>> samples;
    for (std::size_t k = lo; k < hi; ++k) {
      BitemporalSample<T> s;
      s.img_t1 = to_tensor<T>(cut_tile(t1, windows[k]));
      s.img_t2 = to_tensor<T>(cut_tile(t2, windows[k]));
      s.y_cd = s.y_t1 = s.y_t2 = Tensor<T>({1});
      samples.push_back(std::move(s));
    }
    const Batch<T> b = stack(samples);
    const Prediction<T> p = predict(net, b.img_t1, b.img_t2, tau);
    for (std::size_t k = lo; k < hi; ++k) {
      paste(p.change, k - lo, windows[k], out.change);
      if (ssn) {
        paste(p.seg_t1, k - lo, windows[k], out.seg_t1);
        paste(p.seg_t2, k - lo, windows[k], out.seg_t2);
      }
    }
  }
  return out;
}

/// Network rebuilt from a checkpoint; the parameters come from the archive.
template <std::floating_point T = float>
DualTaskNetwork<T> load_network(const Checkpoint& ck) {
  DualTaskNetwork<T> net(ck.model, 0);
  restore(ck, net);
  return net;
}

// ---------------------------------------------------------------------------
// Training

struct TrainIo {
  std::filesystem::path out_dir;  // empty: nothing is written
  /// Called with every history line (steps and evaluations).
  std::function<void(const json&)> on_record;
};

inline json tensor_stats(const Tensor<float>& t) {
  double lo = INFINITY, hi = -INFINITY, sum = 0;
  std::size_t bad = 0, n = 0;
  for (float v : t.storage()) {
    if (!std::isfinite(v)) {
      ++bad;
      continue;
    }
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
    sum += v;
    ++n;
  }
  return {{"shape", t.shape()},
          {"non_finite", bad},
          {"min", n ? lo : 0.0},
          {"max", n ? hi : 0.0},
          {"mean", n ? sum / static_cast<double>(n) : 0.0}};
}

/// Owns the network, optimizer and data stream of one run. step() performs
/// one Adam update; run() loops to max_steps with evaluation, checkpoints
/// and early stopping.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const TileSource& src, const Manifest& m, TrainIo io = {})
      : cfg_(resolve(cfg)),
        src_(&src),
        manifest_(&m),
        io_(std::move(io)),
        net_(cfg_.model, derive_seed(cfg_.seed, 1)),
        opt_(net_.parameters(), cfg_.adam),
        batches_(src, m, Split::train, {cfg_.batch, derive_seed(cfg_.seed, 2), cfg_.augment, cfg_.workers}),
        start_(std::chrono::steady_clock::now()) {
    tune_allocator();
    if (!io_.out_dir.empty()) {
      std::filesystem::create_directories(io_.out_dir);
      std::ofstream(io_.out_dir / "history.jsonl", std::ios::trunc);
    }
  }

  const TrainConfig& config() const { return cfg_; }
  DualTaskNetwork<float>& network() { return net_; }
  const DualTaskNetwork<float>& network() const { return net_; }
  const Adam<float>& optimizer() const { return opt_; }
  const RunHistory& history() const { return history_; }
  std::uint64_t steps_done() const { return opt_.steps(); }
  const std::optional<Checkpoint>& best() const { return best_; }
  bool stopped_early() const { return stopped_early_; }
  const json& last_diagnostic() const { return diagnostic_; }

  /// The batch that step() will consume next.
  Batch<float> next_batch() const {
    const std::uint64_t s = opt_.steps();
    return batches_.batch(s / batches_.num_batches(), s % batches_.num_batches());
  }

  /// One update on `b`. A non-finite loss or gradient throws NumericError
  /// before any parameter changes.
  LossReport step(const Batch<float>& b) {
    const std::uint64_t step_index = opt_.steps() + 1;
    const auto out = net_.forward(Var<float>(b.img_t1), Var<float>(b.img_t2));
    auto loss = total_loss(out, b.y_cd, b.y_t1, b.y_t2, cfg_.loss);
    if (!std::isfinite(loss.report.total)) abort(step_index, b, loss.report, "loss");
    net_.parameters().zero_grad();
    backward(loss.total);
    for (const auto& e : net_.parameters().entries())
      for (float g : e.var.grad().storage())
        if (!std::isfinite(g)) abort(step_index, b, loss.report, "gradient of " + e.name);
    opt_.step();
    StepRecord rec{step_index, loss.report, elapsed()};
    emit(to_json(rec));
    history_.steps.push_back(std::move(rec));
    return loss.report;
  }

  LossReport step() { return step(next_batch()); }

  EvalRecord evaluate(Split split) {
    const auto r = evaluate_split(net_, *src_, *manifest_, split, cfg_.tau, cfg_.batch, cfg_.workers);
    EvalRecord rec{opt_.steps(), split, r.change, r.segmentation, elapsed()};
    emit(to_json(rec));
    history_.evals.push_back(rec);
    return rec;
  }

  Checkpoint snapshot(std::string_view kind) const {
    Checkpoint ck = capture(net_, &opt_);
    ck.meta = {{"kind", kind}, {"preset", std::string(to_string(cfg_.preset))}, {"train", to_json(cfg_)},
               {"loss", to_json(cfg_.loss)}, {"tau", cfg_.tau}};
    if (best_f1_ >= 0) ck.meta["best_val_f1"] = best_f1_;
    return ck;
  }

  void save_last() const {
    if (!io_.out_dir.empty()) save_checkpoint(snapshot("last"), io_.out_dir / "last.ckpt");
  }

  /// Runs to cfg.max_steps; returns the final ("last") checkpoint.
  Checkpoint run() {
    const bool has_val = manifest_->count(Split::val) > 0;
    auto periodic_eval = [&] {
      if (has_val) {
        const auto rec = evaluate(Split::val);
        if (rec.change.f1 > best_f1_) {
          best_f1_ = rec.change.f1;
          best_ = snapshot("best");
          best_->meta["best_val_f1"] = best_f1_;
          if (!io_.out_dir.empty()) save_checkpoint(*best_, io_.out_dir / "best.ckpt");
        }
      }
      if (cfg_.stop_at_train_f1 > 0 && evaluate(Split::train).change.f1 >= cfg_.stop_at_train_f1)
        stopped_early_ = true;
    };
    while (opt_.steps() < cfg_.max_steps && !stopped_early_) {
      step();
      const std::uint64_t s = opt_.steps();
      if (cfg_.checkpoint_every && s % cfg_.checkpoint_every == 0) save_last();
      if (cfg_.eval_every && s % cfg_.eval_every == 0 && s < cfg_.max_steps) periodic_eval();
    }
    if (history_.evals.empty() || history_.evals.back().step != opt_.steps()) periodic_eval();
    save_last();
    return snapshot("last");
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  void emit(const json& j) const {
    if (!io_.out_dir.empty()) std::ofstream(io_.out_dir / "history.jsonl", std::ios::app) << j.dump() << '\n';
    if (io_.on_record) io_.on_record(j);
  }

  [[noreturn]] void abort(std::uint64_t step_index, const Batch<float>& b, const LossReport& report,
                          const std::string& what) {
    json norms = json::object();
    for (const auto& e : net_.parameters().entries()) {
      double s = 0;
      for (float v : e.var.value().storage()) s += static_cast<double>(v) * v;
      norms[e.name] = std::sqrt(s);
    }
    std::vector<std::string> tiles;
    for (auto r : b.records) {
      const auto& rec = manifest_->records.at(r);
      tiles.push_back(rec.scene_id + "@" + std::to_string(rec.x0) + "," + std::to_string(rec.y0));
    }
    diagnostic_ = {{"step", step_index},
                   {"non_finite", what},
                   {"loss", to_json(report)},
                   {"tiles", tiles},
                   {"inputs",
                    {{"img_t1", tensor_stats(b.img_t1)},
                     {"img_t2", tensor_stats(b.img_t2)},
                     {"y_cd", tensor_stats(b.y_cd)},
                     {"y_t1", tensor_stats(b.y_t1)},
                     {"y_t2", tensor_stats(b.y_t2)}}},
                   {"parameter_norms", norms}};
    std::string where;
    if (!io_.out_dir.empty()) {
      std::ofstream(io_.out_dir / "diagnostic.json") << diagnostic_.dump(1) << '\n';
      where = "; snapshot in " + (io_.out_dir / "diagnostic.json").string();
    }
    throw NumericError("non-finite " + what + " at step " + std::to_string(step_index) + where);
  }

  TrainConfig cfg_;
  const TileSource* src_;
  const Manifest* manifest_;
  TrainIo io_;
  DualTaskNetwork<float> net_;
  Adam<float> opt_;
  BatchIterator<float> batches_;
  std::chrono::steady_clock::time_point start_;
  RunHistory history_;
  std::optional<Checkpoint> best_;
  double best_f1_ = -1;
  bool stopped_early_ = false;
  json diagnostic_;
};

struct TrainResult {
  Checkpoint last;
  std::optional<Checkpoint> best;
  RunHistory history;
  bool stopped_early = false;
};

inline TrainResult train(const TrainConfig& cfg, const TileSource& src, const Manifest& m, TrainIo io = {}) {
  Trainer t(cfg, src, m, std::move(io));
  Checkpoint last = t.run();
  return {std::move(last), t.best(), t.history(), t.stopped_early()};
}

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  AblationPreset preset;
  MetricReport change;
  std::uint64_t steps = 0;
};

inline std::string ablation_table_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "method,recall,precision,f1,iou\n";
  for (const auto& r : rows)
    os << table_label(r.preset) << ',' << r.change.recall << ',' << r.change.precision << ',' << r.change.f1 << ','
       << r.change.iou << '\n';
  return os.str();
}

/// Trains every preset from the same base config and data, then scores each
/// run's final network on `split`. Per-preset artifacts go to
/// out_dir/<PRESET>/ when out_dir is set.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base, const TileSource& src, const Manifest& m,
                                             Split split, const std::filesystem::path& out_dir = {}) {
  std::vector<AblationRow> rows;
  for (auto p : kAblationOrder) {
    TrainConfig cfg = base;
    cfg.preset = p;
    TrainIo io;
    if (!out_dir.empty()) io.out_dir = out_dir / std::string(to_string(p));
    Trainer t(cfg, src, m, io);
    t.run();
    const auto r = evaluate_split(t.network(), src, m, split, t.config().tau, t.config().batch, t.config().workers);
    rows.push_back({p, r.change, t.steps_done()});
  }
  if (!out_dir.empty()) std::ofstream(out_dir / "ablation.csv") << ablation_table_csv(rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Post-classification comparison

struct PostClassificationReport {
  MetricReport subtracted;  // against y_t1 XOR y_t2
  MetricReport dataset;     // against y_cd
  DivergenceReport labels;  // y_t1 XOR y_t2 vs y_cd
};

inline json to_json(const PostClassificationReport& r) {
  return {{"rows", json::array({{{"labels", "subtracted"}, {"metrics", to_json(r.subtracted)}},
                                {{"labels", "dataset"}, {"metrics", to_json(r.dataset)}}})},
          {"label_divergence", to_json(r.labels)}};
}

/// XORs the two predicted segmentation maps of every tile and scores the
/// result against the subtracted labels and the change labels.
template <std::floating_point T>
PostClassificationReport compare_post_classification(const DualTaskNetwork<T>& net, const TileSource& src,
                                                     const Manifest& m, Split split, double tau = 0.5,
                                                     std::size_t batch = 16, std::size_t workers = 1) {
  if (!net.config().use_ssn) throw ConfigError("post-classification comparison needs the segmentation branch");
  NoGradGuard ng;
  BatchIterator<T> it(src, m, split, {batch, 0, false, workers});
  ConfusionCounts sub, data, div;
  for (std::size_t b = 0; b < it.num_batches(); ++b) {
    const Batch<T> bt = it.batch(0, b);
    const auto out = net.forward(Var<T>(bt.img_t1), Var<T>(bt.img_t2));
    const Mask pcc =
        post_classification_compare(binarize(out.seg_prob_t1.value(), tau), binarize(out.seg_prob_t2.value(), tau));
    const Mask y1 = to_mask(bt.y_t1), y2 = to_mask(bt.y_t2), ycd = to_mask(bt.y_cd);
    const Mask subtracted = post_classification_compare(y1, y2);
    sub += accumulate(pcc, subtracted);
    data += accumulate(pcc, ycd);
    div += accumulate(subtracted, ycd);
  }
  return {compute_metrics(sub), compute_metrics(data),
          {div.tp, div.fp, div.fn, div.tn, compute_metrics(div).iou}};
}

}  // namespace dtcd

#endif  // DTCD_TRAINER_HPP
