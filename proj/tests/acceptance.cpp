// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and runtime
// budgets are fixed below; the exit status is non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "dtcd/checkpoint.hpp"
#include "dtcd/gradcheck.hpp"
#include "dtcd/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/reference_tables.hpp"

using namespace dtcd;
using namespace dtcd::testing;

namespace {

constexpr double kTableTol = 5e-4;        // absolute, fractional units
constexpr double kReductionTol = 1e-9;    // cdl(0,0) vs bce, max abs
constexpr double kCdlGradTol = 1e-5;      // max relative error
constexpr double kCdlGradStep = 1e-6;
constexpr double kAffinityTol = 1e-6;
constexpr double kProbeTol = 1e-3;        // end-to-end gradient, relative
constexpr double kProbeStep = 1e-5;
constexpr double kOverfitF1 = 0.95;
constexpr std::uint64_t kOverfitSteps = 500;
constexpr double kOverfitBudget = 15 * 60;

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome metric_table() {
  double worst = 0;
  for (const auto& row : kReferenceRows) {
    const auto d = derive_from_pr(row.precision / 100, row.recall / 100);
    worst = std::max({worst, std::abs(d.f1 - row.f1 / 100), std::abs(d.iou - row.iou / 100)});
  }
  return {worst <= kTableTol, std::to_string(kReferenceRows.size()) + " rows, max deviation " + fmt(worst)};
}

Outcome cdl_reduction() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-6, 1 - 1e-6);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const Tensor<double> p({1}, {u(rng)}), y({1}, {rng() & 1 ? 1.0 : 0.0});
    worst = std::max(worst, std::abs(cdl(p, y, {0, 0}) - bce(p, y)));
  }
  return {worst <= kReductionTol, "max |cdl - bce| " + fmt(worst) + " over 10000 pairs"};
}

Outcome cdl_gradient() {
  double worst = 0;
  const double h = kCdlGradStep;
  auto at = [](double p) { return Tensor<double>({1}, {p}); };
  for (double d : {0.0, 0.5, 1.0, 2.0})
    for (double t : {0.0, 0.5, 1.0, 2.0})
      for (double y : {0.0, 1.0})
        for (int k = 1; k <= 99; ++k) {
          const double p = k / 100.0;
          const double a = cdl_grad(at(p), at(y), {d, t})[0];
          const double n = (cdl(at(p + h), at(y), {d, t}) - cdl(at(p - h), at(y), {d, t})) / (2 * h);
          worst = std::max(worst, std::abs(a - n) / std::abs(n));
        }
  return {worst < kCdlGradTol, "max relative error " + fmt(worst) + " over 3168 points"};
}

Outcome cdl_monotone() {
  std::size_t violations = 0;
  auto at = [](double p) { return Tensor<double>({1}, {p}); };
  for (double d : {0.0, 1.0, 2.0, 4.0})
    for (double t : {0.0, 1.0, 2.0, 4.0}) {
      double prev1 = INFINITY, prev0 = -INFINITY;
      for (int k = 1; k <= 99; ++k) {
        const double p = k / 100.0;
        const double l1 = cdl(at(p), at(1), {d, t}), l0 = cdl(at(p), at(0), {d, t});
        violations += !(l1 < prev1) + !(l0 > prev0);
        prev1 = l1;
        prev0 = l0;
        // hardness weights recovered from the loss: (2-p)^d on changed, (1+p)^t on unchanged pixels
        const double w1 = l1 / -std::log(p), w0 = l0 / -std::log1p(-p);
        violations += !(w1 >= 1 - 1e-12 && w1 <= std::pow(2, d) + 1e-12);
        violations += !(w0 >= 1 - 1e-12 && w0 <= std::pow(2, t) + 1e-12);
      }
    }
  return {violations == 0, std::to_string(violations) + " violations on 16 exponent pairs x 99 points"};
}

Outcome tiling_count() {
  const Manifest m = build_manifest({{"whu", 32507, 15354, {}}}, 256, {0.8, 0.1, 0.1}, 0);
  const auto n = m.records.size(), tr = m.count(Split::train), va = m.count(Split::val), te = m.count(Split::test);
  return {n == 7620 && tr == 6096 && va == 762 && te == 762,
          std::to_string(n) + " tiles, split " + std::to_string(tr) + "/" + std::to_string(va) + "/" +
              std::to_string(te)};
}

Outcome weight_sharing() {
  const ModelConfig shared = ModelConfig::preset("tiny");
  ModelConfig separate = shared;
  separate.shared_weights = false;
  DualTaskNetwork<float> a(shared, 1), b(separate, 1);
  std::mt19937_64 rng(2);
  const Tensor<float> x = random_tensor({2, 3, 64, 64}, rng, 0, 1).cast<float>();
  NoGradGuard ng;
  const auto out = a.forward(Var<float>(x), Var<float>(x));
  const bool equal_maps = out.seg_prob_t1.value() == out.seg_prob_t2.value();
  const auto& ps = a.parameters();
  const std::size_t expected = b.parameters().scalar_count() - ps.scalar_count_with_prefix("encoder.") -
                               ps.scalar_count_with_prefix("ssn.");
  return {equal_maps && ps.scalar_count() == expected,
          std::string(equal_maps ? "seg maps bitwise equal" : "seg maps differ") + ", " +
              std::to_string(ps.scalar_count()) + " shared vs " + std::to_string(expected) + " expected parameters"};
}

Outcome dam_identity() {
  double identity_diff = 0, row_err = 0;
  std::mt19937_64 drng(3);
  for (auto [c, hw] : {std::pair<std::size_t, std::size_t>{16, 8}, {32, 16}, {64, 4}}) {
    ParameterStore<double> store;
    Rng rng(c);
    DualAttention<double> dam(store, "dam", c, 4096, rng);
    const Var<double> f(random_tensor({2, c, hw, hw}, drng));
    NoGradGuard ng;
    const Tensor<double> out = dam(f).value();
    for (std::size_t i = 0; i < out.numel(); ++i) identity_diff = std::max(identity_diff, std::abs(out[i] - f.value()[i]));
    for (const Tensor<double>& a : {dam.position_affinity(f).value(), dam.channel_affinity(f).value()}) {
      const std::size_t cols = a.shape().back();
      for (std::size_t r = 0; r < a.numel() / cols; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < cols; ++k) s += a[r * cols + k];
        row_err = std::max(row_err, std::abs(s - 1));
      }
    }
  }
  return {identity_diff == 0 && row_err <= kAffinityTol,
          "identity max abs diff " + fmt(identity_diff) + ", max |row sum - 1| " + fmt(row_err)};
}

Outcome augmentation() {
  constexpr std::size_t n = 16;
  // t1 encodes (row, col) in R and G; labels carry independent patterns.
  SceneSet s;
  s.id = "coords";
  s.image_t1 = Raster(n, n, 3);
  s.image_t2 = Raster(n, n, 3);
  s.seg_label_t1 = Raster(n, n, 1);
  s.seg_label_t2 = Raster(n, n, 1);
  s.change_label = Raster(n, n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      s.image_t1.at(i, j, 0) = static_cast<std::uint8_t>(i);
      s.image_t1.at(i, j, 1) = static_cast<std::uint8_t>(j);
      s.image_t2.at(i, j, 2) = static_cast<std::uint8_t>(i * n + j);
      s.seg_label_t1.at(i, j) = (i * 7 + j * 3) % 5 < 2 ? 255 : 0;
      s.seg_label_t2.at(i, j) = (i ^ j) & 1 ? 255 : 0;
      s.change_label.at(i, j) = s.seg_label_t1.at(i, j) != s.seg_label_t2.at(i, j) ? 255 : 0;
    }
  const Manifest m = build_manifest({describe(s)}, n, {1, 0, 0}, 0);
  const SceneTileSource src(m, {s});
  const auto base = load_sample<double>(src, m.records[0]);

  bool laws = true;
  auto rot = base;
  for (int k = 0; k < 4; ++k) rot = augment(rot, AugmentOp{1, false, false});
  laws = laws && rot == base;
  laws = laws && augment(augment(base, {0, true, false}), {0, true, false}) == base;
  laws = laws && augment(augment(base, {0, false, true}), {0, false, true}) == base;
  std::size_t coordinate_errors = 0;
  for (int idx = 0; idx < 16; ++idx) {
    const AugmentOp op = AugmentOp::from_index(idx);
    const auto t = augment(base, op);
    laws = laws && augment(t, inverse(op)) == base;
    for (std::size_t p = 0; p < n * n; ++p) {
      const auto si = static_cast<std::size_t>(std::lround(t.img_t1[p] * 255));
      const auto sj = static_cast<std::size_t>(std::lround(t.img_t1[n * n + p] * 255));
      const std::size_t sp = si * n + sj;
      coordinate_errors += t.img_t2[2 * n * n + p] != base.img_t2[2 * n * n + sp];
      coordinate_errors += t.y_cd[p] != base.y_cd[sp];
      coordinate_errors += t.y_t1[p] != base.y_t1[sp];
      coordinate_errors += t.y_t2[p] != base.y_t2[sp];
    }
  }
  return {laws && coordinate_errors == 0, std::string(laws ? "group laws hold" : "group law violated") + ", " +
                                              std::to_string(coordinate_errors) + " coordinate mismatches"};
}

/// Module of a parameter: its first two name components, plus ".dam" for
/// attention parameters.
std::string module_of(const std::string& name) {
  const auto first = name.find('.');
  const auto second = name.find('.', first + 1);
  std::string m = name.substr(0, second);
  if (name.compare(second, 5, ".dam.") == 0) m += ".dam";
  return m;
}

Outcome gradient_probe() {
  DualTaskNetwork<double> net(ModelConfig::preset("tiny"), 8);
  // Attention projections only receive gradient once the residual scales are non-zero.
  for (auto g : net.attention_scales()) g.mutable_value().fill(0.1);
  std::mt19937_64 rng(9);
  const Var<double> x1(random_tensor({1, 3, 64, 64}, rng, 0, 1)), x2(random_tensor({1, 3, 64, 64}, rng, 0, 1));
  Tensor<double> y_cd({1, 1, 64, 64}), y1({1, 1, 64, 64}), y2({1, 1, 64, 64});
  for (std::size_t i = 0; i < y_cd.numel(); ++i) {
    y1[i] = (i / 64) < 20 ? 1 : 0;
    y2[i] = (i % 64) < 24 ? 1 : 0;
    y_cd[i] = y1[i] != y2[i] ? 1 : 0;
  }
  const LossConfig lc;
  auto loss_value = [&] {
    NoGradGuard ng;
    return total_loss(net.forward(x1, x2), y_cd, y1, y2, lc).total.value()[0];
  };
  net.parameters().zero_grad();
  backward(total_loss(net.forward(x1, x2), y_cd, y1, y2, lc).total);

  // Candidate elements per module: those whose gradient is within 1e-3 of the module's largest.
  std::map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> candidates;
  std::map<std::string, double> largest;
  const auto& entries = net.parameters().entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const Tensor<double>& g = entries[e].var.grad();
    for (std::size_t i = 0; i < g.numel(); ++i) largest[module_of(entries[e].name)] = std::max(largest[module_of(entries[e].name)], std::abs(g[i]));
  }
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const std::string m = module_of(entries[e].name);
    const Tensor<double>& g = entries[e].var.grad();
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (std::abs(g[i]) >= 1e-3 * largest[m] && g[i] != 0) candidates[m].emplace_back(e, i);
  }
  double worst = 0;
  std::string worst_module;
  std::size_t probed = 0;
  std::mt19937_64 pick(10);
  for (const auto& [m, list] : candidates) {
    const auto [e, i] = list[uniform_index(pick, list.size())];
    Var<double> v = entries[e].var;
    const double analytic = v.grad()[i];
    double& w = v.mutable_value()[i];
    const double saved = w;
    w = saved + kProbeStep;
    const double fp = loss_value();
    w = saved - kProbeStep;
    const double fm = loss_value();
    w = saved;
    const double numeric = (fp - fm) / (2 * kProbeStep);
    const double err = std::abs(analytic - numeric) / std::max(std::abs(analytic), std::abs(numeric));
    if (err > worst) {
      worst = err;
      worst_module = m;
    }
    ++probed;
  }
  return {probed == largest.size() && worst < kProbeTol,
          std::to_string(probed) + "/" + std::to_string(largest.size()) + " modules probed, max relative error " +
              fmt(worst) + (worst_module.empty() ? "" : " (" + worst_module + ")")};
}

// Criteria 10 and 12 share the overfit run.
struct OverfitRun {
  std::string checkpoint_bytes;
  std::vector<json> reports;
  TrainResult result;
  double seconds = 0;
};

TrainConfig overfit_config() {
  TrainConfig c = tiny_config(AblationPreset::scdn_dam_cdl_ssn);
  c.max_steps = kOverfitSteps;
  c.eval_every = 25;
  c.stop_at_train_f1 = kOverfitF1;
  return c;
}

OverfitRun overfit_run(const std::string& tag) {
  const SyntheticData data(overfit_options(), {1.0, 0.0, 0.0});
  const auto dir = scratch_dir("acceptance_" + tag);
  const auto t0 = std::chrono::steady_clock::now();
  OverfitRun r;
  r.result = train(overfit_config(), data.source, data.manifest, {dir, {}});
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.checkpoint_bytes = file_bytes(dir / "last.ckpt");
  for (const auto& e : r.result.history.evals) {
    json j = to_json(e);
    j.erase("wall_seconds");
    r.reports.push_back(j);
  }
  std::filesystem::remove_all(dir);
  return r;
}

std::optional<OverfitRun> first_run;

Outcome synthetic_overfit() {
  first_run = overfit_run("a");
  const auto& evals = first_run->result.history.evals;
  const double f1 = evals.empty() ? 0.0 : evals.back().change.f1;
  const std::uint64_t steps = first_run->result.last.step;
  return {first_run->result.stopped_early && f1 >= kOverfitF1 && steps <= kOverfitSteps &&
              first_run->seconds < kOverfitBudget,
          "train F1 " + fmt(f1) + " at step " + std::to_string(steps) + " in " + fmt(first_run->seconds) + " s"};
}

Outcome post_classification() {
  std::mt19937_64 rng(11);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mask a({16, 16}), b({16, 16});
    for (auto& v : a.bits) v = rng() & 1;
    for (auto& v : b.bits) v = rng() & 1;
    const Mask x = post_classification_compare(a, b);
    for (std::size_t i = 0; i < 256; ++i) mismatches += x.bits[i] != (a.bits[i] != b.bits[i] ? 1 : 0);
  }
  const SyntheticData data(overfit_options(), {0.0, 0.0, 1.0});
  DualTaskNetwork<float> net(ModelConfig::preset("tiny"), 12);
  const auto r = compare_post_classification(net, data.source, data.manifest, Split::test);
  const bool rows_equal = r.subtracted == r.dataset && r.labels.pixels_subtract_only == 0 &&
                          r.labels.pixels_label_only == 0;
  return {mismatches == 0 && rows_equal, std::to_string(mismatches) + " XOR mismatches in 1000 pairs; rows " +
                                             (rows_equal ? "coincide" : "differ") + " on consistent labels"};
}

Outcome determinism() {
  if (!first_run) return {false, "overfit run unavailable"};
  const OverfitRun second = overfit_run("b");
  const bool same_ckpt = second.checkpoint_bytes == first_run->checkpoint_bytes;
  const bool same_reports = second.reports == first_run->reports;
  const double total = first_run->seconds + second.seconds;
  return {same_ckpt && same_reports && total < 2 * kOverfitBudget,
          std::string(same_ckpt ? "checkpoints bitwise equal" : "checkpoints differ") + ", " +
              (same_reports ? "metric reports equal" : "metric reports differ") + ", both runs " + fmt(total) + " s"};
}

}  // namespace

int main() {
  tune_allocator();
  const std::vector<Criterion> criteria = {
      {1, "metric-table identities", 1, metric_table},
      {2, "cdl(0,0) reduces to bce", 1, cdl_reduction},
      {3, "cdl gradient vs central differences", 5, cdl_gradient},
      {4, "cdl monotonicity and hardness-weight bounds", 1, cdl_monotone},
      {5, "tiling count and split", 1, tiling_count},
      {6, "weight sharing", 30, weight_sharing},
      {7, "attention identity and stochastic affinities", 10, dam_identity},
      {8, "augmentation group laws and coordinate consistency", 5, augmentation},
      {9, "end-to-end gradient probe", 120, gradient_probe},
      {10, "synthetic overfit", kOverfitBudget, synthetic_overfit},
      {11, "post-classification equivalence", 5, post_classification},
      // the budget covers both runs, the first of which is criterion 10's
      {12, "determinism", 2 * kOverfitBudget, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double charged = c.id == 12 && first_run ? s + first_run->seconds : s;
    const bool in_budget = charged < c.budget_seconds;
    const bool pass = o.passed && in_budget;
    failed += !pass;
    std::printf("%s  %2d %s: %s; %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), charged, c.budget_seconds, in_budget ? "" : " over budget");
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
