#ifndef DTCD_GRADCHECK_HPP
#define DTCD_GRADCHECK_HPP

// Random tensors and central finite-difference gradient checks.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "dtcd/autograd.hpp"

namespace dtcd {

inline Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(std::move(s));
  for (auto& v : t.storage()) v = d(rng);
  return t;
}

/// Scalar sum(x * c) with a fixed coefficient tensor c.
inline Var<double> contract(const Var<double>& x, const Tensor<double>& c) {
  double acc = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.value()[i] * c[i];
  return make_op<double>(Tensor<double>({1}, acc), {x}, [c](Node<double>& self) {
    if (auto* g = self.input_grad(0))
      for (std::size_t i = 0; i < g->numel(); ++i) (*g)[i] += self.grad[0] * c[i];
  });
}

/// Largest relative error between autograd and central differences over every
/// element of every input. `f` must rebuild the graph from the inputs.
inline double max_grad_error(const std::function<Var<double>(const std::vector<Var<double>>&)>& f,
                             std::vector<Var<double>> inputs, double h = 1e-6) {
  for (auto& v : inputs) v.zero_grad();
  Var<double> out = f(inputs);
  backward(out);
  double worst = 0;
  for (auto& in : inputs) {
    const Tensor<double> analytic = in.grad();
    for (std::size_t i = 0; i < in.numel(); ++i) {
      double& x = in.mutable_value()[i];
      const double saved = x;
      double fp, fm;
      {
        NoGradGuard ng;
        x = saved + h;
        fp = f(inputs).value()[0];
        x = saved - h;
        fm = f(inputs).value()[0];
      }
      x = saved;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = std::abs(a - numeric) / std::max(1e-3, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace dtcd

#endif  // DTCD_GRADCHECK_HPP
