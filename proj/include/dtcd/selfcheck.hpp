#ifndef DTCD_SELFCHECK_HPP
#define DTCD_SELFCHECK_HPP

// Fast gradient and invariant self-tests run by `dtcd check`.

#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dtcd/checkpoint.hpp"
#include "dtcd/datapipe.hpp"
#include "dtcd/gradcheck.hpp"
#include "dtcd/losses.hpp"
#include "dtcd/metrics.hpp"

namespace dtcd {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline CheckResult check_metrics() {
  const auto r = compute_metrics({1, 1, 1, 0});
  const auto d = derive_from_pr(0.9015, 0.8935);
  const bool ok = r.f1 == 0.5 && std::abs(r.iou - 1.0 / 3) < 1e-15 && std::abs(d.f1 - 0.8975) <= 5e-4 &&
                  std::abs(d.iou - 0.8140) <= 5e-4;
  return {"metric identities", ok, "f1=" + sci(r.f1) + " iou=" + sci(r.iou)};
}

inline CheckResult check_cdl_reduction() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> p({1000}), y({1000});
  for (std::size_t i = 0; i < 1000; ++i) {
    p[i] = u(rng);
    y[i] = u(rng) < 0.5 ? 1.0 : 0.0;
  }
  const double diff = std::abs(cdl(p, y, {0.0, 0.0}) - bce(p, y));
  return {"cdl(0,0) == bce", diff <= 1e-9, "diff=" + sci(diff)};
}

inline CheckResult check_cdl_gradient() {
  double worst = 0;
  const double h = 1e-6;
  for (double delta : {0.0, 1.0, 2.0})
    for (double theta : {0.0, 1.0, 2.0})
      for (double y : {0.0, 1.0})
        for (double p = 0.05; p < 0.96; p += 0.1) {
          const Tensor<double> pt({1}, {p}), yt({1}, {y});
          const double a = cdl_grad(pt, yt, {delta, theta})[0];
          const double n =
              (cdl(Tensor<double>({1}, {p + h}), yt, {delta, theta}) - cdl(Tensor<double>({1}, {p - h}), yt, {delta, theta})) /
              (2 * h);
          worst = std::max(worst, std::abs(a - n) / std::max(1e-12, std::abs(n)));
        }
  return {"cdl gradient vs finite differences", worst < 1e-5, "max rel err=" + sci(worst)};
}

inline CheckResult check_autograd() {
  std::mt19937_64 rng(2);
  std::vector<Var<double>> in = {Var<double>(random_tensor({1, 2, 5, 5}, rng), true),
                                 Var<double>(random_tensor({3, 2, 3, 3}, rng), true),
                                 Var<double>(random_tensor({3}, rng), true)};
  const Tensor<double> c = random_tensor({1, 3, 5, 5}, rng);
  const double err = max_grad_error(
      [&](const std::vector<Var<double>>& v) { return contract(sigmoid(conv2d(v[0], v[1], v[2], 1, 1)), c); }, in);
  return {"conv/sigmoid autograd vs finite differences", err < 1e-5, "max rel err=" + sci(err)};
}

inline CheckResult check_attention() {
  ParameterStore<double> store;
  Rng rng(3);
  DualAttention<double> dam(store, "dam", 8, 1024, rng);
  std::mt19937_64 drng(4);
  const Var<double> f(random_tensor({2, 8, 4, 4}, drng));
  const bool identity = dam(f).value() == f.value();
  double worst = 0;
  for (const Tensor<double>& a : {dam.position_affinity(f).value(), dam.channel_affinity(f).value()}) {
    const std::size_t cols = a.dim(2);
    for (std::size_t r = 0; r < a.numel() / cols; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < cols; ++k) s += a[r * cols + k];
      worst = std::max(worst, std::abs(s - 1));
    }
  }
  return {"attention identity at zero scales, stochastic rows", identity && worst <= 1e-6,
          "max |row sum - 1|=" + sci(worst)};
}

inline CheckResult check_augmentation() {
  bool ok = true;
  for (int i = 0; i < 16; ++i) {
    const AugmentOp op = AugmentOp::from_index(i);
    ok = ok && compose(op, inverse(op)).is_identity();
  }
  const AugmentOp rot{1, false, false}, flip{0, true, false};
  ok = ok && compose(compose(rot, rot), compose(rot, rot)).is_identity() && compose(flip, flip).is_identity();
  return {"augmentation group laws", ok, ""};
}

inline CheckResult check_tiling() {
  const Manifest m = build_manifest({{"whu", 32507, 15354, {}}}, 256, {}, 0);
  const bool ok = m.records.size() == 7620 && m.count(Split::train) == 6096 && m.count(Split::val) == 762 &&
                  m.count(Split::test) == 762;
  return {"tiling and split counts", ok, std::to_string(m.records.size()) + " tiles"};
}

inline CheckResult check_weight_sharing() {
  DualTaskNetwork<float> net(ModelConfig::preset("tiny"), 5);
  std::mt19937_64 rng(6);
  Tensor<float> x({1, 3, 64, 64});
  std::uniform_real_distribution<float> u(0, 1);
  for (auto& v : x.storage()) v = u(rng);
  NoGradGuard ng;
  const auto out = net.forward(Var<float>(x), Var<float>(x));
  return {"shared segmentation branch on identical epochs", out.seg_prob_t1.value() == out.seg_prob_t2.value(), ""};
}

inline CheckResult check_checkpoint(const std::filesystem::path& dir) {
  DualTaskNetwork<float> net(ModelConfig::preset("tiny"), 7);
  const Checkpoint ck = capture(net);
  std::filesystem::create_directories(dir);
  const auto path = dir / "selfcheck.ckpt";
  save_checkpoint(ck, path);
  const bool ok = load_checkpoint(path) == ck;
  std::filesystem::remove(path);
  return {"checkpoint round trip", ok, ""};
}

}  // namespace detail

/// Runs every self-test; `scratch` receives temporary files.
inline std::vector<CheckResult> run_self_checks(const std::filesystem::path& scratch) {
  const std::vector<std::pair<const char*, std::function<CheckResult()>>> checks = {
      {"metrics", detail::check_metrics},
      {"cdl reduction", detail::check_cdl_reduction},
      {"cdl gradient", detail::check_cdl_gradient},
      {"autograd", detail::check_autograd},
      {"attention", detail::check_attention},
      {"augmentation", detail::check_augmentation},
      {"tiling", detail::check_tiling},
      {"weight sharing", detail::check_weight_sharing},
      {"checkpoint", [&] { return detail::check_checkpoint(scratch); }}};
  std::vector<CheckResult> out;
  for (const auto& [name, run] : checks) {
    try {
      out.push_back(run());
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

}  // namespace dtcd

#endif  // DTCD_SELFCHECK_HPP
