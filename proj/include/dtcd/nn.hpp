#ifndef DTCD_NN_HPP
#define DTCD_NN_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dtcd/ops.hpp"

namespace dtcd {

using Rng = std::mt19937_64;

/// Owns every trainable array under a stable hierarchical name. Modules hold
/// handles into the store; two modules holding the same handle share weights.
template <std::floating_point T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Var<T> var;
  };

  /// Fan-in scaled normal init: std = gain * sqrt(2 / fan_in).
  Var<T> normal(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0) {
    Tensor<T> t(std::move(shape));
    std::normal_distribution<double> dist(0.0, gain * std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
    return add(name, std::move(t));
  }

  Var<T> zeros(const std::string& name, Shape shape) { return add(name, Tensor<T>(std::move(shape))); }

  Var<T> add(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_[name] = entries_.size();
    entries_.push_back({name, Var<T>(std::move(init), true)});
    return entries_.back().var;
  }

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  /// Total number of trainable scalars.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.var.numel();
    return n;
  }
  std::size_t scalar_count_with_prefix(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.name.rfind(prefix, 0) == 0) n += e.var.numel();
    return n;
  }

  const Var<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &entries_[it->second].var;
  }
  Var<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return entries_[it->second].var;
  }

  void zero_grad() {
    for (auto& e : entries_) e.var.zero_grad();
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

template <std::floating_point T>
struct Conv2d {
  Var<T> weight, bias;
  std::size_t stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(ParameterStore<T>& store, const std::string& name, std::size_t cin, std::size_t cout, std::size_t k,
         std::size_t stride_, std::size_t pad_, Rng& rng, bool with_bias = true, double gain = 1.0)
      : stride(stride_), pad(pad_) {
    weight = store.normal(name + ".weight", {cout, cin, k, k}, cin * k * k, rng, gain);
    if (with_bias) bias = store.zeros(name + ".bias", {cout});
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight, bias, stride, pad); }
};

template <std::floating_point T>
struct ConvTranspose2d {
  Var<T> weight, bias;
  std::size_t stride = 2, pad = 1;

  ConvTranspose2d() = default;
  ConvTranspose2d(ParameterStore<T>& store, const std::string& name, std::size_t cin, std::size_t cout,
                  std::size_t k, std::size_t stride_, std::size_t pad_, Rng& rng)
      : stride(stride_), pad(pad_) {
    // Each output pixel receives (k/stride)^2 taps per input channel.
    const std::size_t taps = std::max<std::size_t>(1, (k / stride_) * (k / stride_));
    weight = store.normal(name + ".weight", {cin, cout, k, k}, cin * taps, rng);
    bias = store.zeros(name + ".bias", {cout});
  }

  Var<T> operator()(const Var<T>& x) const { return conv_transpose2d(x, weight, bias, stride, pad); }
};

}  // namespace dtcd

#endif  // DTCD_NN_HPP
