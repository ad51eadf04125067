#ifndef DTCD_OPTIM_HPP
#define DTCD_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "dtcd/nn.hpp"

namespace dtcd {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0)) throw ConfigError("train.lr must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam betas must lie in [0,1)");
    if (!(eps > 0)) throw ConfigError("adam eps must be positive");
  }
  bool operator==(const AdamConfig&) const = default;
};

/// Adaptive-moment gradient descent with bias correction. Moments are kept
/// per parameter in store registration order.
template <std::floating_point T>
class Adam {
 public:
  Adam(ParameterStore<T>& store, AdamConfig cfg) : store_(&store), cfg_(cfg) {
    cfg.validate();
    for (const auto& e : store.entries()) {
      m_.emplace_back(e.var.shape());
      v_.emplace_back(e.var.shape());
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.lr / bc1);
    const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
    const T eps = static_cast<T>(cfg_.eps);
    auto& entries = store_->entries();
    for (std::size_t k = 0; k < entries.size(); ++k) {
      Var<T> p = entries[k].var;
      const Tensor<T>& g = p.grad();
      if (g.shape() != p.shape()) continue;  // never touched by backward: zero gradient
      auto& m = m_[k];
      auto& v = v_[k];
      auto& w = p.mutable_value();
      for (std::size_t i = 0; i < w.numel(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        w[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
      }
    }
  }

  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  std::vector<Tensor<T>>& first_moments() noexcept { return m_; }
  std::vector<Tensor<T>>& second_moments() noexcept { return v_; }
  const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
  const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }

 private:
  ParameterStore<T>* store_;
  AdamConfig cfg_;
  std::vector<Tensor<T>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace dtcd

#endif  // DTCD_OPTIM_HPP
