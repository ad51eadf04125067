#ifndef DTCD_LOSSES_HPP
#define DTCD_LOSSES_HPP

// Pixel-wise binary losses (cross-entropy, focal, change-detection loss) and
// the weighted dual-task composition. All losses use the natural log, clamp
// probabilities to [eps, 1-eps] and reduce by the mean over every element.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "dtcd/model.hpp"

namespace dtcd {

enum class LossKind { bce, focal, cdl };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::bce: return "bce";
    case LossKind::focal: return "focal";
    case LossKind::cdl: return "cdl";
  }
  return "?";
}
inline LossKind loss_kind_from_string(std::string_view s) {
  if (s == "bce") return LossKind::bce;
  if (s == "focal") return LossKind::focal;
  if (s == "cdl") return LossKind::cdl;
  throw ConfigError("unknown loss kind: " + std::string(s));
}

/// Exponents of the changed-sample (delta) and unchanged-sample (theta) weights.
struct CdlParams {
  double delta = 2.0;
  double theta = 2.0;
  void validate() const {
    if (!(delta >= 0) || !(theta >= 0)) throw ConfigError("cdl exponents must be non-negative");
  }
  bool operator==(const CdlParams&) const = default;
};

struct FocalParams {
  double alpha_t = 0.25;
  double gamma = 2.0;
  void validate() const {
    if (!(gamma >= 0)) throw ConfigError("focal gamma must be non-negative");
    if (!(alpha_t >= 0 && alpha_t <= 1)) throw ConfigError("focal alpha must lie in [0,1]");
  }
  bool operator==(const FocalParams&) const = default;
};

struct LossWeights {
  double alpha = 0.25;      // per segmentation branch
  double lambda_cd = 0.5;   // change detection (main + auxiliary)
  void validate() const {
    if (!(alpha >= 0) || !(lambda_cd >= 0)) throw ConfigError("loss weights must be non-negative");
    if (alpha == 0 && lambda_cd == 0) throw ConfigError("loss weights alpha and lambda_cd are both zero");
  }
  bool operator==(const LossWeights&) const = default;
};

struct LossConfig {
  LossKind kind = LossKind::cdl;
  CdlParams cdl;
  FocalParams focal;
  LossWeights weights;
  void validate() const {
    cdl.validate();
    focal.validate();
    weights.validate();
  }
  bool operator==(const LossConfig&) const = default;
};

struct LossReport {
  double l_ss_t1 = 0, l_ss_t2 = 0, l_cd = 0;
  std::vector<double> l_aux;
  double total = 0;

  double aux_mean() const {
    if (l_aux.empty()) return 0;
    double s = 0;
    for (double v : l_aux) s += v;
    return s / static_cast<double>(l_aux.size());
  }
  /// Recomputes the weighted total from the parts.
  double recompose(const LossWeights& w) const { return w.alpha * (l_ss_t1 + l_ss_t2) + w.lambda_cd * (l_cd + aux_mean()); }
};

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

template <class T>
void check_pair(const Tensor<T>& p, const Tensor<T>& y, const char* what) {
  if (p.shape() != y.shape())
    throw ShapeError(std::string(what) + ": prediction " + shape_str(p.shape()) + " and label " + shape_str(y.shape()) +
                     " differ");
  if (p.numel() == 0) throw ShapeError(std::string(what) + ": empty input");
  for (std::size_t i = 0; i < y.numel(); ++i)
    if (y[i] != T(0) && y[i] != T(1)) throw DataError(std::string(what) + ": label is not binary");
  for (std::size_t i = 0; i < p.numel(); ++i)
    if (std::isnan(p[i])) throw NumericError(std::string(what) + ": NaN in prediction");
}

// Per-element loss and its derivative w.r.t. the clamped probability.
struct ElementLoss {
  double value, slope;
};

inline ElementLoss bce_element(double p, bool positive) {
  return positive ? ElementLoss{-std::log(p), -1.0 / p} : ElementLoss{-std::log1p(-p), 1.0 / (1.0 - p)};
}

inline ElementLoss focal_element(double p, bool positive, const FocalParams& f) {
  const double g = f.gamma;
  if (positive) {
    const double q = 1.0 - p, lp = std::log(p);
    const double mod = std::pow(q, g);
    const double dmod = g == 0 ? 0.0 : g * std::pow(q, g - 1.0);
    return {-f.alpha_t * mod * lp, f.alpha_t * (dmod * lp - mod / p)};
  }
  const double a = 1.0 - f.alpha_t, lq = std::log1p(-p);
  const double mod = std::pow(p, g);
  const double dmod = g == 0 ? 0.0 : g * std::pow(p, g - 1.0);
  return {-a * mod * lq, a * (-dmod * lq + mod / (1.0 - p))};
}

inline ElementLoss cdl_element(double p, bool positive, const CdlParams& c) {
  if (positive) {
    const double w = std::pow(2.0 - p, c.delta), lp = std::log(p);
    const double dw = c.delta == 0 ? 0.0 : c.delta * std::pow(2.0 - p, c.delta - 1.0);
    return {-w * lp, dw * lp - w / p};
  }
  const double w = std::pow(1.0 + p, c.theta), lq = std::log1p(-p);
  const double dw = c.theta == 0 ? 0.0 : c.theta * std::pow(1.0 + p, c.theta - 1.0);
  return {-w * lq, -dw * lq + w / (1.0 - p)};
}

struct LossSpec {
  LossKind kind = LossKind::bce;
  CdlParams cdl;
  FocalParams focal;

  ElementLoss operator()(double p, bool positive) const {
    switch (kind) {
      case LossKind::bce: return bce_element(p, positive);
      case LossKind::focal: return focal_element(p, positive, focal);
      case LossKind::cdl: return cdl_element(p, positive, cdl);
    }
    return {};
  }
};

template <class T>
double mean_loss(const Tensor<T>& p, const Tensor<T>& y, const LossSpec& spec, const char* what) {
  check_pair(p, y, what);
  double acc = 0;
  for (std::size_t i = 0; i < p.numel(); ++i) acc += spec(clamp_prob(static_cast<double>(p[i])), y[i] != T(0)).value;
  return acc / static_cast<double>(p.numel());
}

}  // namespace detail

/// Mean binary cross-entropy.
template <std::floating_point T>
double bce(const Tensor<T>& p, const Tensor<T>& y) {
  return detail::mean_loss(p, y, {LossKind::bce, {}, {}}, "bce");
}

/// Mean focal loss; alpha_t weighs positives, 1 - alpha_t negatives.
template <std::floating_point T>
double focal(const Tensor<T>& p, const Tensor<T>& y, double alpha_t, double gamma) {
  FocalParams f{alpha_t, gamma};
  f.validate();
  return detail::mean_loss(p, y, {LossKind::focal, {}, f}, "focal");
}

/// Mean change-detection loss: -(2-p)^delta log p on changed pixels,
/// -(1+p)^theta log(1-p) on unchanged pixels.
template <std::floating_point T>
double cdl(const Tensor<T>& p, const Tensor<T>& y, const CdlParams& params) {
  params.validate();
  return detail::mean_loss(p, y, {LossKind::cdl, params, {}}, "cdl");
}

/// Derivative of cdl() with respect to every element of p (mean reduction
/// included, i.e. per-element slope divided by the element count).
template <std::floating_point T>
Tensor<T> cdl_grad(const Tensor<T>& p, const Tensor<T>& y, const CdlParams& params) {
  params.validate();
  detail::check_pair(p, y, "cdl_grad");
  Tensor<T> g(p.shape());
  const double inv_n = 1.0 / static_cast<double>(p.numel());
  for (std::size_t i = 0; i < p.numel(); ++i) {
    if (p[i] <= T(0) || p[i] >= T(1))
      throw NumericError("cdl_grad: probability " + std::to_string(static_cast<double>(p[i])) +
                         " is not strictly inside (0,1)");
    const double pc = detail::clamp_prob(static_cast<double>(p[i]));
    g[i] = static_cast<T>(detail::cdl_element(pc, y[i] != T(0), params).slope * inv_n);
  }
  return g;
}

/// Differentiable mean loss of a probability map against a fixed label.
template <std::floating_point T>
Var<T> loss_var(const Var<T>& p, const Tensor<T>& y, const detail::LossSpec& spec) {
  detail::check_pair(p.value(), y, "loss");
  const std::size_t n = p.numel();
  Tensor<T> slope(p.shape());
  double acc = 0;
  const auto& pv = p.value();
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = static_cast<double>(pv[i]);
    const double pc = detail::clamp_prob(raw);
    const auto e = spec(pc, y[i] != T(0));
    acc += e.value;
    // Zero slope where the clamp is active.
    slope[i] = (raw >= kProbEpsilon && raw <= 1.0 - kProbEpsilon) ? static_cast<T>(e.slope / static_cast<double>(n)) : T(0);
  }
  Tensor<T> out({1}, static_cast<T>(acc / static_cast<double>(n)));
  return make_op<T>(std::move(out), {p}, [slope = std::move(slope)](Node<T>& self) {
    if (auto* g = self.input_grad(0)) {
      const T go = self.grad[0];
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += go * slope[i];
    }
  });
}

/// Weighted sum of scalar Vars.
template <std::floating_point T>
Var<T> weighted_sum(const std::vector<Var<T>>& terms, const std::vector<double>& weights) {
  T acc = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) acc += static_cast<T>(weights[i]) * terms[i].value()[0];
  return make_op<T>(Tensor<T>({1}, acc), terms, [weights](Node<T>& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i)
      if (auto* g = self.input_grad(i)) (*g)[0] += static_cast<T>(weights[i]) * self.grad[0];
  });
}

/// Max-pools a binary (N,1,H,W) label by an integer factor, so a coarse
/// pixel is changed when any fine pixel under it is.
template <std::floating_point T>
Tensor<T> downsample_label_max(const Tensor<T>& y, std::size_t oh, std::size_t ow) {
  require_rank4(y, "downsample_label_max");
  const std::size_t n = y.dim(0), c = y.dim(1), h = y.dim(2), w = y.dim(3);
  if (oh == 0 || ow == 0 || h % oh || w % ow) throw ShapeError("downsample_label_max: non-integer factor");
  const std::size_t fy = h / oh, fx = w / ow;
  Tensor<T> out({n, c, oh, ow});
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        T m = 0;
        for (std::size_t a = 0; a < fy; ++a)
          for (std::size_t b = 0; b < fx; ++b) m = std::max(m, y[(p * h + i * fy + a) * w + j * fx + b]);
        out[(p * oh + i) * ow + j] = m;
      }
  return out;
}

template <std::floating_point T>
struct TotalLoss {
  Var<T> total;
  LossReport report;
};

/// Dual-task objective: alpha * (l_ss_t1 + l_ss_t2) + lambda_cd * (l_cd + mean(l_aux)).
/// Segmentation terms always use cross-entropy; the change terms use cfg.kind.
template <std::floating_point T>
TotalLoss<T> total_loss(const ModelOutput<T>& out, const Tensor<T>& y_cd, const Tensor<T>& y_t1, const Tensor<T>& y_t2,
                        const LossConfig& cfg) {
  cfg.validate();
  const detail::LossSpec change_spec{cfg.kind, cfg.cdl, cfg.focal};
  const detail::LossSpec seg_spec{LossKind::bce, {}, {}};
  if (!out.has_segmentation() && cfg.weights.alpha > 0)
    throw ConfigError("total_loss: alpha > 0 but the model has no segmentation outputs");

  std::vector<Var<T>> terms;
  std::vector<double> weights;
  TotalLoss<T> r;
  Var<T> l_cd = loss_var(out.change_prob, y_cd, change_spec);
  r.report.l_cd = l_cd.value()[0];
  terms.push_back(l_cd);
  weights.push_back(cfg.weights.lambda_cd);

  if (out.has_segmentation()) {
    Var<T> l1 = loss_var(out.seg_prob_t1, y_t1, seg_spec);
    Var<T> l2 = loss_var(out.seg_prob_t2, y_t2, seg_spec);
    r.report.l_ss_t1 = l1.value()[0];
    r.report.l_ss_t2 = l2.value()[0];
    terms.push_back(l1);
    terms.push_back(l2);
    weights.push_back(cfg.weights.alpha);
    weights.push_back(cfg.weights.alpha);
  }
  const double aux_w = out.change_aux.empty() ? 0.0 : cfg.weights.lambda_cd / static_cast<double>(out.change_aux.size());
  for (const auto& aux : out.change_aux) {
    const Tensor<T> y_aux = downsample_label_max(y_cd, aux.dim(2), aux.dim(3));
    Var<T> la = loss_var(aux, y_aux, change_spec);
    r.report.l_aux.push_back(la.value()[0]);
    terms.push_back(la);
    weights.push_back(aux_w);
  }
  r.total = weighted_sum(terms, weights);
  r.report.total = r.report.recompose(cfg.weights);
  return r;
}

}  // namespace dtcd

#endif  // DTCD_LOSSES_HPP
