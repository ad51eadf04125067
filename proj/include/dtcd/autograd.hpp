#ifndef DTCD_AUTOGRAD_HPP
#define DTCD_AUTOGRAD_HPP

// Tape-free reverse-mode differentiation: every differentiable result keeps
// shared ownership of its inputs plus a closure that pushes its gradient back.
// backward() walks the resulting DAG in reverse topological order.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dtcd/tensor.hpp"

namespace dtcd {

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph construction for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <std::floating_point T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
  bool requires_grad = false;
  bool is_leaf = true;

  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
  /// Gradient buffer of input i, or nullptr when that input is constant.
  Tensor<T>* input_grad(std::size_t i) {
    auto& in = inputs[i];
    return in->requires_grad ? &in->grad_buffer() : nullptr;
  }
};

/// Handle to a node of the computation graph. Copies alias the same node.
template <std::floating_point T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false) : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const noexcept { return node_ != nullptr; }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
  std::size_t numel() const { return node_->value.numel(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  void zero_grad() {
    if (node_->grad.shape() == node_->value.shape()) node_->grad.fill(T(0));
  }

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }
  bool same_handle(const Var& o) const noexcept { return node_ == o.node_; }
  /// Detached copy holding the same value, outside any graph.
  Var detach() const { return Var(node_->value, false); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates a graph node. `backward` is only retained when some input needs a
/// gradient and grad mode is on.
template <std::floating_point T, class Fn>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, Fn&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->is_leaf = false;
  const bool needs = grad_enabled() &&
                     std::any_of(inputs.begin(), inputs.end(), [](const Var<T>& v) { return v.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& v : inputs) node->inputs.push_back(v.node());
    node->backward_fn = std::forward<Fn>(backward);
  }
  return Var<T>(std::move(node));
}

/// Back-propagates from `root`, seeded with `seed` (ones when omitted, which
/// requires a scalar root). Interior nodes are released afterwards; leaf
/// gradients accumulate.
template <std::floating_point T>
void backward(const Var<T>& root, const Tensor<T>* seed = nullptr) {
  if (!root.requires_grad()) return;
  // Owning references: clearing a node's inputs below must not free nodes
  // that are still waiting for their turn.
  std::vector<std::shared_ptr<Node<T>>> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->inputs.size()) {
      std::shared_ptr<Node<T>> child = top.first->inputs[top.second++];
      if (child->requires_grad && seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(std::move(top.first));
      stack.pop_back();
    }
  }
  Node<T>& r = *root.node();
  if (seed) {
    if (seed->shape() != r.value.shape()) throw ShapeError("backward: seed shape mismatch");
    auto& g = r.grad_buffer();
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] += (*seed)[i];
  } else {
    if (r.value.numel() != 1) throw ShapeError("backward: implicit seed needs a scalar root");
    r.grad_buffer()[0] += T(1);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = it->get();
    if (n->is_leaf) continue;
    if (n->backward_fn && n->grad.shape() == n->value.shape()) n->backward_fn(*n);
    n->backward_fn = nullptr;
    n->inputs.clear();
    n->grad = Tensor<T>();
  }
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

template <std::floating_point T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k)
      if (auto* g = self.input_grad(k))
        for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
  });
}

template <std::floating_point T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError("sub: shape mismatch");
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
    if (auto* g = self.input_grad(1))
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] -= self.grad[i];
  });
}

template <std::floating_point T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = v > T(0) ? v : T(0);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i)
        if (self.value[i] > T(0)) (*g)[i] += self.grad[i];
  });
}

template <std::floating_point T>
T logistic(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

template <std::floating_point T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = logistic(v);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i) {
        const T y = self.value[i];
        (*g)[i] += self.grad[i] * y * (T(1) - y);
      }
  });
}

/// Multiplies every element of x by the single element of `scale`.
template <std::floating_point T>
Var<T> mul_scalar(const Var<T>& x, const Var<T>& scale) {
  if (scale.numel() != 1) throw ShapeError("mul_scalar: scale must hold one element");
  const T s = scale.value()[0];
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v *= s;
  return make_op<T>(std::move(out), {x, scale}, [s](Node<T>& self) {
    const auto& xv = self.inputs[0]->value;
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i] * s;
    if (auto* g = self.input_grad(1)) {
      T acc = 0;
      for (std::size_t i = 0; i < xv.numel(); ++i) acc += self.grad[i] * xv[i];
      (*g)[0] += acc;
    }
  });
}

/// x (N,C,H,W) scaled per (n,c) by s (N,C,1,1).
template <std::floating_point T>
Var<T> channel_scale(const Var<T>& x, const Var<T>& s) {
  require_rank4(x.value(), "channel_scale");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (s.shape() != Shape{n, c, 1, 1}) throw ShapeError("channel_scale: scale shape " + shape_str(s.shape()));
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < n * c; ++i) {
    const T f = s.value()[i];
    for (std::size_t j = 0; j < hw; ++j) out[i * hw + j] *= f;
  }
  return make_op<T>(std::move(out), {x, s}, [n, c, hw](Node<T>& self) {
    const auto& xv = self.inputs[0]->value;
    const auto& sv = self.inputs[1]->value;
    auto* gx = self.input_grad(0);
    auto* gs = self.input_grad(1);
    for (std::size_t i = 0; i < n * c; ++i) {
      T acc = 0;
      for (std::size_t j = 0; j < hw; ++j) {
        const std::size_t k = i * hw + j;
        if (gx) (*gx)[k] += self.grad[k] * sv[i];
        acc += self.grad[k] * xv[k];
      }
      if (gs) (*gs)[i] += acc;
    }
  });
}

/// Concatenates 4-D tensors along the channel axis.
template <std::floating_point T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  const auto& s0 = xs.front().shape();
  if (s0.size() != 4) throw ShapeError("concat_channels: expected 4-D inputs");
  std::size_t total_c = 0;
  for (const auto& x : xs) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
      throw ShapeError("concat_channels: incompatible shapes " + shape_str(s0) + " and " + shape_str(s));
    total_c += s[1];
  }
  const std::size_t n = s0[0], hw = s0[2] * s0[3];
  Tensor<T> out({n, total_c, s0[2], s0[3]});
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    const std::size_t c = x.dim(1);
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(x.value().raw() + b * c * hw, c * hw, out.raw() + (b * total_c + off) * hw);
    off += c;
  }
  return make_op<T>(std::move(out), xs, [offsets, n, hw, total_c](Node<T>& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto* g = self.input_grad(k);
      if (!g) continue;
      const std::size_t c = self.inputs[k]->value.dim(1);
      for (std::size_t b = 0; b < n; ++b) {
        const T* src = self.grad.raw() + (b * total_c + offsets[k]) * hw;
        T* dst = g->raw() + b * c * hw;
        for (std::size_t i = 0; i < c * hw; ++i) dst[i] += src[i];
      }
    }
  });
}

template <std::floating_point T>
Var<T> reshape(const Var<T>& x, Shape s) {
  Tensor<T> out = x.value().reshaped(std::move(s));
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[i];
  });
}

template <std::floating_point T>
Var<T> abs(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = std::abs(v);
  return make_op<T>(std::move(out), {x}, [](Node<T>& self) {
    const auto& xv = self.inputs[0]->value;
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i)
        (*g)[i] += xv[i] > T(0) ? self.grad[i] : (xv[i] < T(0) ? -self.grad[i] : T(0));
  });
}

/// Clamps into [lo, hi]; the gradient is passed only where no clamping occurred.
template <std::floating_point T>
Var<T> clamp(const Var<T>& x, T lo, T hi) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = std::clamp(v, lo, hi);
  return make_op<T>(std::move(out), {x}, [lo, hi](Node<T>& self) {
    const auto& xv = self.inputs[0]->value;
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i)
        if (xv[i] >= lo && xv[i] <= hi) (*g)[i] += self.grad[i];
  });
}

}  // namespace dtcd

#endif  // DTCD_AUTOGRAD_HPP
